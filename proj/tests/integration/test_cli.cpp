#include <doctest.h>

#include <sstream>

#include "../support/harness.hpp"
#include "beamline/cli.hpp"

using namespace beamline;
using namespace std::chrono_literals;

namespace {

struct Run {
  int rc;
  std::string out;
  std::string err;
};

Run beamctl(const harness::LiveServer& s, std::vector<std::string> args) {
  args.insert(args.begin(), {"--port", std::to_string(s.tcp->port())});
  std::ostringstream out, err;
  const int rc = cli::run_cli(args, out, err);
  return {rc, out.str(), err.str()};
}

std::uint64_t accepts(const harness::LiveServer& s) { return s.tcp->accept_count(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("status prints the table, --json prints the wire snapshot") {
  harness::LiveServer s;
  auto r = beamctl(s, {"status"});
  CHECK(r.rc == 0);
  CHECK(r.out.find("NAME") != std::string::npos);
  CHECK(r.out.find("grating_pitch") != std::string::npos);

  r = beamctl(s, {"--json", "status"});
  CHECK(r.rc == 0);
  const Json snap = Json::parse(r.out);
  CHECK(snap["units"].size() == 5);
  CHECK(snap["server"] == "beamline-sim");
}

TEST_CASE("exit codes: 0 ok, 1 server error, 2 usage or connection") {
  harness::LiveServer s;
  auto r = beamctl(s, {"energy", "400", "--mode", "fit"});
  CHECK(r.rc == 1);
  CHECK(r.err.find("E_STALE_FIT") != std::string::npos);

  CHECK(beamctl(s, {"move", "ghost", "10"}).rc == 1);
  CHECK(beamctl(s, {"move", "mirror_pitch"}).rc == 2);
  CHECK(beamctl(s, {"frobnicate"}).rc == 2);
  CHECK(beamctl(s, {"energy", "400", "--mode", "warp"}).rc == 2);
  CHECK(beamctl(s, {"--session", "dynamic", "energy", "400", "--wait"}).rc == 0);
  r = beamctl(s, {"--json", "energy"});
  CHECK(r.rc == 0);
  CHECK(Json::parse(r.out)["e_ev"].get<double>() == doctest::Approx(400.0).epsilon(1e-3));

  std::uint16_t dead = 0;
  {
    harness::LiveServer gone;
    dead = gone.tcp->port();
  }
  std::ostringstream out, err;
  CHECK(cli::run_cli({"--port", std::to_string(dead), "--timeout-ms", "2000", "status"}, out, err) == 2);
  CHECK(err.str().find("E_CONN") != std::string::npos);
}

TEST_CASE("fit build, param set and fit mode round trip") {
  harness::LiveServer s;
  CHECK(beamctl(s, {"fit", "build", "250", "450", "21"}).rc == 0);
  auto r = beamctl(s, {"--json", "fit", "report"});
  CHECK(r.rc == 0);
  CHECK(Json::parse(r.out)["mirror"]["max_dev_deg"].get<double>() < 0.01);
  CHECK(beamctl(s, {"energy", "300", "--mode", "fit", "--wait"}).rc == 0);
  CHECK(beamctl(s, {"param", "set", "c", "2.3"}).rc == 0);
  CHECK(beamctl(s, {"energy", "310", "--mode", "fit"}).rc == 1);
  CHECK(beamctl(s, {"param", "set", "q", "2"}).rc == 2);
}

TEST_CASE("a scripted batch uses one connection statically and one per request dynamically") {
  harness::LiveServer s;
  harness::TempDir dir;
  const auto script = dir.path / "ops.txt";
  {
    std::ofstream f(script);
    f << "# warm-up\n";
    for (int i = 0; i < 20; ++i) f << "calc " << 300 + i << "\n";
    f << "move mirror_pitch 500 --wait\nstatus\n";
  }
  auto before = accepts(s);
  auto r = beamctl(s, {"--session", "static", "batch", script.string()});
  CHECK(r.rc == 0);
  CHECK(accepts(s) - before == 1);

  before = accepts(s);
  r = beamctl(s, {"--session", "dynamic", "batch", script.string()});
  CHECK(r.rc == 0);
  CHECK(accepts(s) - before == 22);

  {
    std::ofstream f(script);
    f << "calc 300\nmove ghost 1\ncalc 301\n";
  }
  r = beamctl(s, {"batch", script.string()});
  CHECK(r.rc == 1);
  CHECK(r.out.find("301") == std::string::npos);
}

TEST_CASE("scan --out matches the server-persisted CSV byte for byte") {
  harness::LiveServer s;
  harness::TempDir dir;
  const auto mine = dir.path / "client.csv";
  const auto theirs = dir.path / "server.csv";
  const auto r = beamctl(s, {"scan", "398", "402", "--step", "0.5", "--dwell", "0.1", "--out", mine.string(),
                             "--server-out", theirs.string(), "--poll-ms", "5"});
  CHECK(r.rc == 0);
  const auto a = harness::read_file(mine);
  CHECK(a == harness::read_file(theirs));
  CHECK(scan::parse_csv(a).size() == 9);
  // one streamed CSV row per point plus the header
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') >= 10);
}

TEST_CASE("bench reports static faster than dynamic with 1 vs N accepts") {
  harness::LiveServer s;
  harness::TempDir dir;
  const auto report = dir.path / "bench.json";
  const auto r = beamctl(s, {"bench", "--calls", "200", "--mode", "both", "--report", report.string()});
  CHECK(r.rc == 0);
  const Json j = Json::parse(harness::read_file(report));
  CHECK(j["dynamic"]["accepts"] == 200);
  CHECK(j["static"]["accepts"] == 1);
  CHECK(j["static"]["total_ms"].get<double>() < j["dynamic"]["total_ms"].get<double>());
  CHECK(r.out.find("ratio dynamic/static") != std::string::npos);
}

TEST_CASE("fault injection and clearing") {
  harness::LiveServer s;
  CHECK(beamctl(s, {"fault", "grating_pitch", "stall"}).rc == 0);
  auto r = beamctl(s, {"status"});
  CHECK(r.out.find("FAULT(stall)") != std::string::npos);
  CHECK(beamctl(s, {"energy", "400"}).rc == 1);
  CHECK(beamctl(s, {"fault", "clear", "grating_pitch"}).rc == 0);
  CHECK(beamctl(s, {"energy", "400"}).rc == 0);
  CHECK(beamctl(s, {"fault", "grating_enc", "--slip", "8"}).rc == 0);
  r = beamctl(s, {"--json", "call", "unit_state", R"({"unit":"grating_enc"})"});
  CHECK(r.rc == 0);
  CHECK(Json::parse(r.out)["slip_counts"] == 8);
}

}
