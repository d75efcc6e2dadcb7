#include "beamline/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "beamline/client.hpp"
#include "beamline/scan.hpp"

namespace beamline::cli {

namespace {

namespace proto = protocol;
using client::Endpoint;

constexpr int kOk = 0;
constexpr int kServerError = 1;
constexpr int kUsage = 2;

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string cell(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return number(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string upper(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

/// Server error carried out of a command body.
struct ServerError {
  std::string code;
  std::string message;
};

enum class SessionMode { Static, Dynamic };

/// One logical link to the server. Static mode opens a single session on
/// first use and keeps it for every later call.
class Link {
 public:
  Link(Endpoint ep, SessionMode mode, client::Duration timeout) : ep_(std::move(ep)), mode_(mode), timeout_(timeout) {}

  Json call(const std::string& op, std::optional<Json> args = std::nullopt) {
    proto::Response r = raw(op, std::move(args));
    if (!r.ok()) throw ServerError{r.error().code, r.error().message};
    return r.result();
  }

  proto::Response raw(const std::string& op, std::optional<Json> args) {
    if (mode_ == SessionMode::Dynamic) return client::call_dynamic(ep_, proto::Request{++dynamic_id_, op, std::move(args)}, timeout_);
    if (!session_) session_ = client::Session::open(ep_, timeout_);
    return session_->call(op, std::move(args));
  }

  const Endpoint& endpoint() const noexcept { return ep_; }
  client::Duration timeout() const noexcept { return timeout_; }

 private:
  Endpoint ep_;
  SessionMode mode_;
  client::Duration timeout_;
  std::optional<client::Session> session_;
  std::uint64_t dynamic_id_ = 0;
};

struct Globals {
  std::string host = "127.0.0.1";
  std::uint16_t port = 5025;
  std::string session = "static";
  bool json = false;
  int timeout_ms = 30000;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  Globals globals;
  std::unique_ptr<Link> link;

  Link& get_link() {
    if (!link) {
      link = std::make_unique<Link>(Endpoint{globals.host, globals.port},
                                    globals.session == "dynamic" ? SessionMode::Dynamic : SessionMode::Static,
                                    client::Duration(globals.timeout_ms));
    }
    return *link;
  }
};

using Action = std::function<int(Context&)>;

void print_json(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

/// Human or --json rendering of a plain result.
void print_result(Context& ctx, const Json& result, const std::function<void(std::ostream&)>& human) {
  if (ctx.globals.json) {
    print_json(ctx.out, result);
  } else {
    human(ctx.out);
  }
}

int print_kv(Context& ctx, const Json& result) {
  print_result(ctx, result, [&](std::ostream& os) {
    for (const auto& [k, v] : result.items()) os << k << ": " << (v.is_structured() ? v.dump() : cell(v)) << '\n';
  });
  return kOk;
}

// --- scan ----------------------------------------------------------------------

struct ScanArgs {
  double start = 0.0;
  double end = 0.0;
  std::optional<double> step;
  std::optional<double> dwell;
  std::optional<double> settle;
  std::string mode = "realtime";
  std::string out_file;
  std::string server_out;
  int poll_ms = 50;
};

int run_scan(Context& ctx, const ScanArgs& a) {
  Link& link = ctx.get_link();
  Json args{{"e_start", a.start}, {"e_end", a.end}, {"mode", a.mode}};
  if (a.step) args["step"] = *a.step;
  if (a.dwell) args["dwell_s"] = *a.dwell;
  if (a.settle) args["settle_s"] = *a.settle;
  if (!a.server_out.empty()) args["output"] = a.server_out;

  const Json started = link.call("start_scan", args);
  const auto scan_id = started["scan_id"].get<std::uint64_t>();
  const std::size_t total = started["plan"]["n_points"].get<std::size_t>();
  if (!ctx.globals.json) {
    ctx.out << "scan " << scan_id << ": " << total << " points\n";
    ctx.out << scan::kCsvHeader << '\n';
  }

  std::vector<scan::ScanPoint> points;
  Json status;
  for (;;) {
    const Json r = link.call("scan_points", Json{{"since", points.size()}});
    if (r["scan_id"].get<std::uint64_t>() != scan_id) {
      throw ServerError{"E_NO_SCAN", "scan " + std::to_string(scan_id) + " was superseded"};
    }
    for (const auto& pj : r["points"]) {
      const scan::ScanPoint p = scan::point_from_json(pj);
      points.push_back(p);
      if (ctx.globals.json) {
        ctx.out << pj.dump() << '\n';
      } else {
        const std::string row = scan::to_csv(std::span(&points.back(), 1));
        ctx.out << row.substr(row.find('\n') + 1);
      }
      ctx.out.flush();
    }
    status = r["status"];
    const std::string state = status["state"].get<std::string>();
    if (state != "running" && points.size() >= status["index"].get<std::size_t>()) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(a.poll_ms));
  }

  if (!a.out_file.empty()) {
    try {
      scan::persist(points, a.out_file);
    } catch (const Error& e) {
      ctx.err << to_string(e.code()) << ": " << e.what() << '\n';
      return kServerError;
    }
  }

  const std::string state = status["state"].get<std::string>();
  if (!ctx.globals.json) ctx.out << "scan " << scan_id << " " << state << " (" << points.size() << "/" << total << ")\n";
  if (state == "done") return kOk;
  ctx.err << "scan " << state << (status.contains("code") ? ": " + status["code"].get<std::string>() : "") << '\n';
  return kServerError;
}

// --- bench ---------------------------------------------------------------------

struct BenchResult {
  double total_ms = 0.0;
  std::uint64_t accepts = 0;
};

std::uint64_t accept_counter(const Endpoint& ep, client::Duration timeout) {
  const auto r = client::call_dynamic(ep, proto::Request{1, "ping", std::nullopt}, timeout);
  if (!r.ok()) throw ServerError{r.error().code, r.error().message};
  return r.result().value("connections", std::uint64_t{0});
}

BenchResult bench_mode(const Endpoint& ep, SessionMode mode, int calls, double e_lo, double e_hi,
                       client::Duration timeout) {
  const std::uint64_t before = accept_counter(ep, timeout);
  const auto t0 = std::chrono::steady_clock::now();
  {
    Link link(ep, mode, timeout);
    for (int i = 0; i < calls; ++i) {
      const double e = e_lo + (e_hi - e_lo) * (i + 0.5) / calls;
      link.call("calc_positions", Json{{"e_ev", e}, {"mode", "realtime"}});
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  const std::uint64_t after = accept_counter(ep, timeout);
  return BenchResult{std::chrono::duration<double, std::milli>(t1 - t0).count(), after - before - 1};
}

int run_bench(Context& ctx, int calls, const std::string& mode, const std::string& report_path) {
  if (calls < 1) {
    ctx.err << "bench: --calls must be >= 1\n";
    return kUsage;
  }
  const Endpoint ep{ctx.globals.host, ctx.globals.port};
  const client::Duration timeout(ctx.globals.timeout_ms);
  const auto snap = client::call_dynamic(ep, proto::Request{1, "snapshot", std::nullopt}, timeout);
  if (!snap.ok()) throw ServerError{snap.error().code, snap.error().message};
  const Json& mono = snap.result()["mono"];
  const double e_lo = mono["energy_min"].get<double>();
  const double e_hi = mono["energy_max"].get<double>();

  Json report{{"calls", calls}, {"op", "calc_positions"}};
  std::optional<BenchResult> dyn;
  std::optional<BenchResult> sta;
  if (mode == "dynamic" || mode == "both") {
    dyn = bench_mode(ep, SessionMode::Dynamic, calls, e_lo, e_hi, timeout);
    report["dynamic"] = Json{{"total_ms", dyn->total_ms}, {"per_call_ms", dyn->total_ms / calls}, {"accepts", dyn->accepts}};
  }
  if (mode == "static" || mode == "both") {
    sta = bench_mode(ep, SessionMode::Static, calls, e_lo, e_hi, timeout);
    report["static"] = Json{{"total_ms", sta->total_ms}, {"per_call_ms", sta->total_ms / calls}, {"accepts", sta->accepts}};
  }
  if (dyn && sta) report["ratio_dynamic_over_static"] = dyn->total_ms / sta->total_ms;

  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << report.dump(2) << '\n';
    if (!f) {
      ctx.err << "E_IO: cannot write " << report_path << '\n';
      return kServerError;
    }
  }

  if (ctx.globals.json) {
    print_json(ctx.out, report);
    return kOk;
  }
  auto row = [&](const char* name, const BenchResult& r) {
    ctx.out << std::left << std::setw(9) << name << std::right << std::setw(7) << calls << std::setw(12) << std::fixed
            << std::setprecision(1) << r.total_ms << std::setw(13) << std::setprecision(3) << r.total_ms / calls
            << std::setw(9) << r.accepts << '\n';
  };
  ctx.out << std::left << std::setw(9) << "MODE" << std::right << std::setw(7) << "CALLS" << std::setw(12) << "TOTAL_MS"
          << std::setw(13) << "PER_CALL_MS" << std::setw(9) << "ACCEPTS" << '\n';
  if (dyn) row("dynamic", *dyn);
  if (sta) row("static", *sta);
  if (dyn && sta) {
    ctx.out << "ratio dynamic/static: " << std::fixed << std::setprecision(2) << dyn->total_ms / sta->total_ms << '\n';
  }
  ctx.out.unsetf(std::ios::floatfield);
  return kOk;
}

// --- command tree ----------------------------------------------------------------

int execute(const std::vector<std::string>& args, Context& ctx, bool in_batch);

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> std::quoted(tok)) out.push_back(tok);
  return out;
}

int run_batch(Context& ctx, const std::string& path) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) {
      ctx.err << "batch: cannot open " << path << '\n';
      return kUsage;
    }
    in = &file;
  }
  std::string line;
  while (std::getline(*in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const int rc = execute(tokens, ctx, true);
    if (rc != kOk) return rc;
  }
  return kOk;
}

int execute(const std::vector<std::string>& raw_args, Context& ctx, bool in_batch) {
  CLI::App app{"Beamline control client", "beamctl"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals& g = ctx.globals;
  if (!in_batch) {
    if (const char* h = std::getenv("BEAMLINE_HOST")) g.host = h;
    if (const char* p = std::getenv("BEAMLINE_PORT")) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(p, p + std::strlen(p), v);
      if (ec == std::errc{} && v > 0 && v < 65536) g.port = static_cast<std::uint16_t>(v);
    }
    app.add_option("--host", g.host, "Device server host (env BEAMLINE_HOST)")->capture_default_str();
    app.add_option("--port", g.port, "Device server port (env BEAMLINE_PORT)")->capture_default_str();
    app.add_option("--session", g.session, "Connection discipline")
        ->check(CLI::IsMember({"static", "dynamic"}))
        ->capture_default_str();
    app.add_option("--timeout-ms", g.timeout_ms, "Per-call timeout")->capture_default_str();
  }
  app.add_flag("--json", g.json, "Print wire result objects as JSON");

  Action action;

  // status
  auto* status = app.add_subcommand("status", "Show unit states and beamline summary");
  status->callback([&] {
    action = [](Context& c) {
      const Json snap = c.get_link().call("snapshot");
      if (c.globals.json) {
        print_json(c.out, snap);
        return kOk;
      }
      const Json& scan = snap["scan"];
      c.out << "server " << cell(snap["server"]) << "  energy " << cell(snap["energy_ev"]) << " eV  mode "
            << cell(snap["mode"]) << "  fits " << cell(snap["fits"]) << "  scan " << cell(scan["state"]) << ' '
            << cell(scan["index"]) << '/' << cell(scan["total"]) << '\n';
      c.out << render_table(snap);
      return kOk;
    };
  });

  // move
  std::string move_unit;
  std::int64_t move_steps = 0;
  bool move_rel = false;
  bool move_wait = false;
  auto* move = app.add_subcommand("move", "Move a motor");
  move->add_option("unit", move_unit)->required();
  move->add_option("steps", move_steps, "Target (or delta with --rel)")->required()->allow_extra_args(false);
  move->add_flag("--rel", move_rel, "Relative move");
  move->add_flag("--wait", move_wait, "Return after the motor stops");
  move->callback([&] {
    action = [&](Context& c) {
      const Json args = move_rel ? Json{{"unit", move_unit}, {"delta", move_steps}, {"wait", move_wait}}
                                 : Json{{"unit", move_unit}, {"steps", move_steps}, {"wait", move_wait}};
      return print_kv(c, c.get_link().call(move_rel ? "move_rel" : "move_abs", args));
    };
  });

  // stop
  std::string stop_unit;
  auto* stop = app.add_subcommand("stop", "Stop a motor");
  stop->add_option("unit", stop_unit)->required();
  stop->callback([&] {
    action = [&](Context& c) { return print_kv(c, c.get_link().call("stop", Json{{"unit", stop_unit}})); };
  });

  // energy
  std::optional<double> energy_ev;
  std::string energy_mode = "realtime";
  bool energy_wait = false;
  auto* energy = app.add_subcommand("energy", "Set the photon energy, or show it when no value is given");
  energy->add_option("eV", energy_ev);
  energy->add_option("--mode", energy_mode)->check(CLI::IsMember({"fit", "realtime"}))->capture_default_str();
  energy->add_flag("--wait", energy_wait, "Return after both axes stop");
  energy->callback([&] {
    action = [&](Context& c) {
      if (!energy_ev) return print_kv(c, c.get_link().call("get_energy"));
      return print_kv(c, c.get_link().call("set_energy", Json{{"e_ev", *energy_ev}, {"mode", energy_mode}, {"wait", energy_wait}}));
    };
  });

  // calc
  double calc_ev = 0.0;
  std::string calc_mode = "realtime";
  auto* calc = app.add_subcommand("calc", "Compute axis targets without moving");
  calc->add_option("eV", calc_ev)->required();
  calc->add_option("--mode", calc_mode)->check(CLI::IsMember({"fit", "realtime"}))->capture_default_str();
  calc->callback([&] {
    action = [&](Context& c) {
      return print_kv(c, c.get_link().call("calc_positions", Json{{"e_ev", calc_ev}, {"mode", calc_mode}}));
    };
  });

  // fit build / report
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  std::size_t fit_n = 21;
  std::size_t fit_probes = 1000;
  auto* fit = app.add_subcommand("fit", "Cubic position fits");
  fit->require_subcommand(1);
  auto* fit_build = fit->add_subcommand("build", "Fit both axes over [lo, hi] from n samples");
  fit_build->add_option("lo", fit_lo)->required();
  fit_build->add_option("hi", fit_hi)->required();
  fit_build->add_option("n", fit_n)->required();
  fit_build->callback([&] {
    action = [&](Context& c) {
      return print_kv(c, c.get_link().call("build_fit", Json{{"e_lo", fit_lo}, {"e_hi", fit_hi}, {"n", fit_n}}));
    };
  });
  auto* fit_report = fit->add_subcommand("report", "Deviation of the fits from the exact solve");
  fit_report->add_option("--probes", fit_probes)->capture_default_str();
  fit_report->callback([&] {
    action = [&](Context& c) {
      return print_kv(c, c.get_link().call("fit_report", Json{{"n_probe", fit_probes}}));
    };
  });

  // scan
  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan", "Run an energy scan and stream its points");
  scan->add_option("start", scan_args.start)->required();
  scan->add_option("end", scan_args.end)->required();
  scan->add_option("--step", scan_args.step, "eV; defaults to start / resolving power");
  scan->add_option("--dwell", scan_args.dwell, "Seconds per point");
  scan->add_option("--settle", scan_args.settle, "Seconds after motion");
  scan->add_option("--mode", scan_args.mode)->check(CLI::IsMember({"fit", "realtime"}))->capture_default_str();
  scan->add_option("--out", scan_args.out_file, "Write received points as CSV");
  scan->add_option("--server-out", scan_args.server_out, "Path the server persists its CSV to");
  scan->add_option("--poll-ms", scan_args.poll_ms)->capture_default_str();
  scan->callback([&] { action = [&](Context& c) { return run_scan(c, scan_args); }; });

  // abort
  auto* abort = app.add_subcommand("abort", "Abort the running scan after its current point");
  abort->callback([&] { action = [](Context& c) { return print_kv(c, c.get_link().call("abort_scan")); }; });

  // fault / fault clear
  std::string fault_unit;
  std::string fault_code;
  std::optional<std::int64_t> fault_slip;
  std::string clear_unit;
  auto* fault = app.add_subcommand("fault", "Inject a fault: fault <unit> <code>; or: fault clear <unit>");
  fault->require_subcommand(0, 1);
  fault->add_option("unit", fault_unit);
  fault->add_option("code", fault_code);
  fault->add_option("--slip", fault_slip, "Encoder slip in counts instead of a fault");
  auto* fault_clear = fault->add_subcommand("clear", "Clear a unit fault");
  fault_clear->add_option("unit", clear_unit)->required();
  fault_clear->callback([&] {
    action = [&](Context& c) { return print_kv(c, c.get_link().call("clear_fault", Json{{"unit", clear_unit}})); };
  });
  fault->callback([&] {
    if (fault_clear->parsed()) return;
    if (fault_unit.empty() || (fault_code.empty() && !fault_slip)) {
      throw CLI::ValidationError("fault", "needs <unit> <code>, <unit> --slip N, or clear <unit>");
    }
    action = [&](Context& c) {
      Json args{{"unit", fault_unit}};
      if (!fault_code.empty()) args["code"] = fault_code;
      if (fault_slip) args["slip_counts"] = *fault_slip;
      return print_kv(c, c.get_link().call("inject_fault", args));
    };
  });

  // param set
  std::string param_name;
  double param_value = 0.0;
  auto* param = app.add_subcommand("param", "Monochromator parameters");
  param->require_subcommand(1);
  auto* param_set = param->add_subcommand("set", "Set c, k, N or hc (marks fits stale)");
  param_set->add_option("name", param_name)->required()->check(CLI::IsMember({"c", "k", "N", "hc"}));
  param_set->add_option("value", param_value)->required();
  param_set->callback([&] {
    action = [&](Context& c) {
      return print_kv(c, c.get_link().call("set_mono_param", Json{{"name", param_name}, {"value", param_value}}));
    };
  });

  // detector
  double det_ev = 0.0;
  double det_dwell = 1.0;
  std::optional<std::string> det_unit;
  auto* detector = app.add_subcommand("detector", "Read the detector at an energy");
  detector->add_option("eV", det_ev)->required();
  detector->add_option("--dwell", det_dwell)->capture_default_str();
  detector->add_option("--unit", det_unit);
  detector->callback([&] {
    action = [&](Context& c) {
      Json args{{"e_ev", det_ev}, {"dwell_s", det_dwell}};
      if (det_unit) args["unit"] = *det_unit;
      return print_kv(c, c.get_link().call("read_detector", args));
    };
  });

  // bench
  int bench_calls = 500;
  std::string bench_mode_name = "both";
  std::string bench_report;
  auto* bench = app.add_subcommand("bench", "Time calc_positions over dynamic and static sessions");
  bench->add_option("--calls", bench_calls)->capture_default_str();
  bench->add_option("--mode", bench_mode_name)->check(CLI::IsMember({"dynamic", "static", "both"}))->capture_default_str();
  bench->add_option("--report", bench_report, "Write the measurements as JSON");
  bench->callback([&] {
    action = [&](Context& c) { return run_bench(c, bench_calls, bench_mode_name, bench_report); };
  });

  // call: any op with raw JSON args
  std::string call_op;
  std::string call_args;
  auto* call = app.add_subcommand("call", "Send one op with JSON arguments and print the result");
  call->add_option("op", call_op)->required();
  call->add_option("args", call_args, "JSON object");
  call->callback([&] {
    action = [&](Context& c) {
      std::optional<Json> args;
      if (!call_args.empty()) {
        Json parsed = Json::parse(call_args, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
          c.err << "call: args must be a JSON object\n";
          return kUsage;
        }
        args = std::move(parsed);
      }
      print_json(c.out, c.get_link().call(call_op, args));
      return kOk;
    };
  });

  // batch
  std::string batch_file;
  if (!in_batch) {
    auto* batch = app.add_subcommand("batch", "Run subcommands from a file (or stdin), one per line, over one link");
    batch->add_option("file", batch_file, "Script path; '-' or omitted reads stdin");
    batch->callback([&] { action = [&](Context& c) { return run_batch(c, batch_file); }; });
  }

  // CLI11 wants argv order reversed for the vector overload.
  std::vector<std::string> reversed(raw_args.rbegin(), raw_args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    ctx.out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    ctx.out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    ctx.err << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  }
  if (!action) {
    ctx.err << app.help();
    return kUsage;
  }

  try {
    return action(ctx);
  } catch (const ServerError& e) {
    ctx.err << e.code << ": " << e.message << '\n';
    return kServerError;
  } catch (const Error& e) {
    ctx.err << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == ErrorCode::Conn ? kUsage : kServerError;
  }
}

}  // namespace

std::string render_table(const Json& snapshot) {
  std::vector<Json> units;
  if (snapshot.contains("units") && snapshot["units"].is_array()) {
    units.assign(snapshot["units"].begin(), snapshot["units"].end());
  }
  std::stable_sort(units.begin(), units.end(), [](const Json& a, const Json& b) {
    return a.value("name", std::string{}) < b.value("name", std::string{});
  });

  std::ostringstream os;
  auto row = [&](const std::string& name, const std::string& kind, const std::string& state, const std::string& value) {
    os << std::left << std::setw(16) << name << ' ' << std::setw(9) << kind << ' ' << std::setw(24) << state << ' '
       << value;
    os << '\n';
  };
  row("NAME", "KIND", "STATE", "POSITION/READING");
  for (const auto& u : units) {
    std::string state = upper(u.value("state", std::string{}));
    if (u.contains("fault") && u["fault"].is_string()) state = "FAULT(" + u["fault"].get<std::string>() + ")";
    const Json value = u.value("kind", std::string{}) == "motor" ? u.value("position", Json()) : u.value("reading", Json());
    row(u.value("name", std::string{}), u.value("kind", std::string{}), state, cell(value));
  }
  std::string text = os.str();
  // Trailing padding is noise in a terminal and in diffs.
  std::string out;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    out += line;
    out += '\n';
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, {}, nullptr};
  try {
    return execute(args, ctx, false);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
}

}  // namespace beamline::cli
