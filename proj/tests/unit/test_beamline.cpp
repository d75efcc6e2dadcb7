#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../support/harness.hpp"
#include "../support/oracle.hpp"
#include "beamline/beamline.hpp"

using namespace beamline;

namespace {

struct Outcome {
  bool delivered = false;
  Reply reply;
};

/// Dispatches a wire-shaped command. Deferred replies land in the returned
/// outcome once advance() resolves them.
std::shared_ptr<Outcome> send(Beamline& bl, std::string_view op, const Json& args = Json::object()) {
  auto out = std::make_shared<Outcome>();
  bl.dispatch(decode_command(op, args), [out](Reply r) {
    out->delivered = true;
    out->reply = std::move(r);
  });
  return out;
}

Json ok(Beamline& bl, std::string_view op, const Json& args = Json::object()) {
  const auto out = send(bl, op, args);
  REQUIRE(out->delivered);
  INFO(op, ": ", out->reply.message);
  REQUIRE(out->reply.ok);
  return out->reply.result;
}

ErrorCode err(Beamline& bl, std::string_view op, const Json& args = Json::object()) {
  const auto out = send(bl, op, args);
  REQUIRE(out->delivered);
  REQUIRE_FALSE(out->reply.ok);
  return out->reply.code;
}

void run_scan(Beamline& bl, double chunk = 0.05) {
  for (int i = 0; i < 1000000 && bl.scanner().running(); ++i) bl.advance(chunk);
}

Json peak_scan_plan(const std::string& output = {}) {
  Json plan{{"e_start", 390.0}, {"e_end", 410.0}, {"step", 0.5}, {"dwell_s", 0.2}, {"settle_s", 0.05}};
  if (!output.empty()) plan["output"] = output;
  return plan;
}

}  // namespace

TEST_SUITE("beamline") {

TEST_CASE("angle to step mapping rounds half away from zero") {
  const AxisMapping a{"m", "e", 10.0, 1.0};
  CHECK(angle_to_steps(a, 1.05) == 1);
  CHECK(angle_to_steps(a, 0.95) == -1);
  CHECK(angle_to_steps(a, 3.0) == 20);
  CHECK(steps_to_angle(a, 20) == doctest::Approx(3.0));
  CHECK_THROWS_AS(angle_to_steps(a, NAN), Error);
}

TEST_CASE("set_energy drives both axes to the oracle step targets") {
  Beamline bl(default_config());
  const Json r = ok(bl, "set_energy", {{"e_ev", 400.0}});
  const auto mirror = std::llround(oracle::frozen::kMirror400 * 3600.0);
  const auto grating = std::llround(oracle::frozen::kGrating400 * 3600.0);
  CHECK(mirror == 14340);
  CHECK(r["mirror_steps"] == mirror);
  CHECK(r["grating_steps"] == grating);
  CHECK(r["duration_s"].get<double>() == doctest::Approx(grating / 20000.0));

  CHECK(err(bl, "set_energy", {{"e_ev", 410.0}}) == ErrorCode::Busy);
  bl.advance(5.0);
  CHECK(bl.units().motor("mirror_pitch").position() == mirror);
  CHECK(bl.units().motor("grating_pitch").position() == grating);

  // Readback from the grating encoder lands within one grating step of the set energy.
  const double per_step = static_cast<double>(oracle::ev_per_grating_step(1200, 1, 2.25, 1239.8420, 400, 3600));
  const auto e = bl.energy_estimate();
  REQUIRE(e.has_value());
  CHECK(std::abs(*e - 400.0) <= per_step);
  CHECK(ok(bl, "get_energy")["e_ev"].get<double>() == *e);
  CHECK(bl.snapshot()["energy_ev"].get<double>() == *e);
}

TEST_CASE("set_energy with wait replies once both axes land") {
  Beamline bl(default_config());
  const auto out = send(bl, "set_energy", {{"e_ev", 250.0}, {"wait", true}});
  CHECK_FALSE(out->delivered);
  CHECK(bl.pending_waits() == 1);
  bl.advance(0.5);
  CHECK_FALSE(out->delivered);
  bl.advance(5.0);
  REQUIRE(out->delivered);
  CHECK(out->reply.ok);
  CHECK(bl.pending_waits() == 0);

  const auto move = send(bl, "move_abs", {{"unit", "mirror_pitch"}, {"steps", 100}, {"wait", true}});
  bl.advance(0.01);
  bl.dispatch(cmd::InjectFault{"mirror_pitch", "stall", {}}, [](Reply) {});
  REQUIRE(move->delivered);
  CHECK(move->reply.code == ErrorCode::Fault);
}

TEST_CASE("fit mode goes stale after a monochromator parameter change") {
  Beamline bl(default_config());
  CHECK(err(bl, "set_energy", {{"e_ev", 300.0}, {"mode", "fit"}}) == ErrorCode::StaleFit);
  CHECK(err(bl, "fit_report") == ErrorCode::StaleFit);
  ok(bl, "build_fit", {{"e_lo", 250.0}, {"e_hi", 450.0}, {"n", 21}});
  CHECK(bl.snapshot()["fits"] == "fresh");
  ok(bl, "set_energy", {{"e_ev", 300.0}, {"mode", "fit"}});
  bl.advance(10.0);
  CHECK(err(bl, "set_energy", {{"e_ev", 500.0}, {"mode", "fit"}}) == ErrorCode::Range);

  const Json p = ok(bl, "set_mono_param", {{"name", "c"}, {"value", 2.3}});
  CHECK(p["fits_stale"] == true);
  CHECK(bl.snapshot()["fits"] == "stale");
  CHECK(err(bl, "set_energy", {{"e_ev", 320.0}, {"mode", "fit"}}) == ErrorCode::StaleFit);
  CHECK(err(bl, "calc_positions", {{"e_ev", 320.0}, {"mode", "fit"}}) == ErrorCode::StaleFit);
  CHECK(err(bl, "start_scan", {{"e_start", 300.0}, {"e_end", 301.0}, {"mode", "fit"}}) == ErrorCode::StaleFit);
  ok(bl, "set_energy", {{"e_ev", 320.0}});
  bl.advance(10.0);
  CHECK(ok(bl, "fit_report", {{"n_probe", 10}})["stale"] == true);

  ok(bl, "build_fit", {{"e_lo", 250.0}, {"e_hi", 450.0}, {"n", 21}});
  ok(bl, "set_energy", {{"e_ev", 320.0}, {"mode", "fit"}});
}

TEST_CASE("monochromator parameters validate and feed the solve") {
  Beamline bl(default_config());
  ok(bl, "set_mono_param", {{"name", "c"}, {"value", 2.0}});
  const Json r = ok(bl, "calc_positions", {{"e_ev", 400.0}});
  CHECK(std::abs(r["beta_deg"].get<double>() - oracle::frozen::kBeta400c2) < 1e-9);
  CHECK(std::abs(r["alpha_deg"].get<double>() - oracle::frozen::kAlpha400c2) < 1e-9);
  CHECK(std::abs(r["mirror_deg"].get<double>() - oracle::frozen::kMirror400c2) < 1e-9);

  CHECK(err(bl, "set_mono_param", {{"name", "c"}, {"value", 1.0}}) == ErrorCode::Range);
  CHECK(err(bl, "set_mono_param", {{"name", "k"}, {"value", 1.5}}) == ErrorCode::Range);
  CHECK(err(bl, "set_mono_param", {{"name", "N"}, {"value", -3.0}}) == ErrorCode::Range);
  CHECK(err(bl, "set_mono_param", {{"name", "zeta"}, {"value", 1.0}}) == ErrorCode::Range);
  CHECK(bl.mono().fixed_focus_ratio == 2.0);
  CHECK(err(bl, "calc_positions", {{"e_ev", 10.0}}) == ErrorCode::Range);
}

TEST_CASE("unit errors carry their codes") {
  Beamline bl(default_config());
  CHECK(err(bl, "unit_state", {{"unit", "nope"}}) == ErrorCode::NoUnit);
  CHECK(err(bl, "move_abs", {{"unit", "mirror_pitch"}, {"steps", 999999}}) == ErrorCode::Limit);
  CHECK(err(bl, "move_abs", {{"unit", "i0"}, {"steps", 1}}) == ErrorCode::NoUnit);
  CHECK(err(bl, "inject_fault", {{"unit", "mirror_pitch"}, {"slip_counts", 3}}) == ErrorCode::Range);
  ok(bl, "inject_fault", {{"unit", "grating_enc"}, {"slip_counts", 5}});
  CHECK(ok(bl, "unit_state", {{"unit", "grating_enc"}})["reading"] == 5);
  ok(bl, "inject_fault", {{"unit", "grating_pitch"}, {"code", "overheat"}});
  const Json u = ok(bl, "unit_state", {{"unit", "grating_pitch"}});
  CHECK(u["state"] == "fault");
  CHECK(u["fault"] == "overheat");
  CHECK(err(bl, "set_energy", {{"e_ev", 400.0}}) == ErrorCode::Fault);
  CHECK(err(bl, "start_scan", {{"e_start", 300.0}, {"e_end", 301.0}}) == ErrorCode::Fault);
  ok(bl, "clear_fault", {{"unit", "grating_pitch"}});
  ok(bl, "set_energy", {{"e_ev", 400.0}});
  CHECK(ok(bl, "list_units")["units"].size() == 5);
}

TEST_CASE("noiseless peak scan finds 400 eV and persists every point") {
  harness::TempDir dir;
  const auto csv = (dir.path / "peak.csv").string();
  Beamline bl(default_config());
  const Json started = ok(bl, "start_scan", peak_scan_plan(csv));
  CHECK(started["plan"]["n_points"] == 41);
  CHECK(err(bl, "set_energy", {{"e_ev", 300.0}}) == ErrorCode::Busy);
  CHECK(err(bl, "move_abs", {{"unit", "grating_pitch"}, {"steps", 1}}) == ErrorCode::Busy);
  CHECK(err(bl, "start_scan", peak_scan_plan()) == ErrorCode::Busy);
  CHECK(err(bl, "build_fit", {{"e_lo", 250.0}, {"e_hi", 450.0}}) == ErrorCode::Busy);
  run_scan(bl);

  CHECK(bl.scanner().status().state == scan::ScanState::Done);
  const auto& pts = bl.scanner().points();
  REQUIRE(pts.size() == 41);
  const auto best = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.counts < b.counts; });
  CHECK(std::abs(best->e_set_ev - 400.0) <= 0.5);
  for (const auto& p : pts) {
    const double per_step = static_cast<double>(oracle::ev_per_grating_step(1200, 1, 2.25, 1239.8420, p.e_set_ev, 3600));
    CHECK(std::abs(p.e_readback_ev - p.e_set_ev) <= per_step);
    CHECK(p.counts == doctest::Approx(bl.units().detector("i0").flux(p.e_readback_ev) * 0.2));
  }
  CHECK(scan::parse_csv(harness::read_file(csv)) == pts);
  CHECK(harness::read_file(csv) == scan::to_csv(pts));

  const Json since = ok(bl, "scan_points", {{"since", 39}});
  CHECK(since["points"].size() == 2);
  CHECK(since["status"]["state"] == "done");
}

TEST_CASE("flat detector scan is flat") {
  auto cfg = default_config();
  cfg.detector.peaks.clear();
  Beamline bl(cfg);
  ok(bl, "start_scan", {{"e_start", 100.0}, {"e_end", 110.0}, {"step", 1.0}, {"dwell_s", 0.5}});
  run_scan(bl);
  REQUIRE(bl.scanner().points().size() == 11);
  for (const auto& p : bl.scanner().points()) CHECK(p.counts == doctest::Approx(50.0));
}

TEST_CASE("a motor fault at point 3 fails the scan and keeps points 0..2") {
  harness::TempDir dir;
  const auto csv = (dir.path / "fault.csv").string();
  Beamline bl(default_config());
  ok(bl, "start_scan", {{"e_start", 300.0}, {"e_end", 309.0}, {"step", 1.0}, {"dwell_s", 0.2}, {"output", csv}});
  for (int i = 0; i < 100000 && bl.scanner().points().size() < 3; ++i) bl.advance(0.001);
  REQUIRE(bl.scanner().points().size() == 3);
  ok(bl, "inject_fault", {{"unit", "mirror_pitch"}, {"code", "stall"}});
  bl.advance(0.01);
  const Json s = ok(bl, "scan_status");
  CHECK(s["state"] == "failed");
  CHECK(s["code"] == "unit_fault");
  CHECK(s["index"] == 3);
  CHECK(s["points"] == 3);
  const auto saved = scan::parse_csv(harness::read_file(csv));
  REQUIRE(saved.size() == 3);
  CHECK(saved[2].index == 2);
}

TEST_CASE("abort replies at the next point boundary") {
  Beamline bl(default_config());
  CHECK(err(bl, "abort_scan") == ErrorCode::NoScan);
  ok(bl, "start_scan", {{"e_start", 300.0}, {"e_end", 309.0}, {"step", 1.0}, {"dwell_s", 1.0}});
  bl.advance(0.5);
  const auto out = send(bl, "abort_scan");
  CHECK_FALSE(out->delivered);
  CHECK(bl.scanner().running());
  run_scan(bl, 0.01);
  REQUIRE(out->delivered);
  CHECK(out->reply.result["state"] == "aborted");
  CHECK(out->reply.result["index"] == out->reply.result["points"]);
  CHECK(bl.scanner().points().size() == 1);
}

TEST_CASE("scan results do not depend on tick size") {
  auto run = [](double chunk) {
    Beamline bl(default_config());
    ok(bl, "start_scan", {{"e_start", 395.0}, {"e_end", 405.0}, {"step", 1.0}, {"dwell_s", 0.3}, {"settle_s", 0.1}});
    run_scan(bl, chunk);
    auto pts = bl.scanner().points();
    for (auto& p : pts) p.calc_ms = 0.0;  // wall-clock measurement
    return pts;
  };
  const auto fine = run(0.0007);
  const auto coarse = run(0.37);
  const auto whole = run(1000.0);
  REQUIRE(fine.size() == 11);
  CHECK(fine == coarse);
  CHECK(fine == whole);
}

TEST_CASE("fuzzed dispatch always answers or defers, never throws") {
  Beamline bl(default_config());
  std::mt19937_64 rng(42);
  const auto ops = op_vocabulary();
  std::uniform_int_distribution<std::size_t> pick_op(0, ops.size() - 1);
  std::uniform_real_distribution<double> energy(-100.0, 1200.0);
  std::uniform_int_distribution<std::int64_t> steps(-100000, 100000);
  std::uniform_int_distribution<int> coin(0, 3);
  const std::vector<std::string> units{"mirror_pitch", "grating_pitch", "grating_enc", "i0", "ghost"};
  std::uniform_int_distribution<std::size_t> pick_unit(0, units.size() - 1);

  std::vector<std::shared_ptr<Outcome>> deferred;
  int decoded = 0;
  for (int i = 0; i < 5000; ++i) {
    Json args{{"unit", units[pick_unit(rng)]},
              {"steps", steps(rng)},
              {"delta", steps(rng) / 10},
              {"e_ev", energy(rng)},
              {"e_lo", energy(rng)},
              {"e_hi", energy(rng)},
              {"n", coin(rng) * 7},
              {"e_start", energy(rng)},
              {"e_end", energy(rng)},
              {"step", energy(rng) / 50},
              {"dwell_s", 0.01},
              {"name", coin(rng) ? "c" : "k"},
              {"value", energy(rng) / 100},
              {"code", "x"},
              {"wait", coin(rng) == 0}};
    if (coin(rng) == 0) args.erase("unit");
    Command c;
    try {
      c = decode_command(ops[pick_op(rng)], args);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Parse);
      continue;
    }
    ++decoded;
    auto out = std::make_shared<Outcome>();
    bl.dispatch(c, [out](Reply r) {
      CHECK_FALSE(out->delivered);
      out->delivered = true;
      out->reply = std::move(r);
    });
    if (!out->delivered) deferred.push_back(out);
    else if (!out->reply.ok) CHECK(out->reply.code != ErrorCode::Internal);
    bl.advance(0.05);
  }
  CHECK(decoded > 1000);
  bl.dispatch(cmd::ClearFault{"mirror_pitch"}, [](Reply) {});
  bl.dispatch(cmd::ClearFault{"grating_pitch"}, [](Reply) {});
  for (int i = 0; i < 100000 && bl.pending_waits() > 0; ++i) bl.advance(1.0);
  for (const auto& d : deferred) CHECK(d->delivered);
}

}
