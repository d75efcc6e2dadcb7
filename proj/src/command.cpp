#include "beamline/command.hpp"

#include <array>
#include <limits>
#include <type_traits>

namespace beamline {

namespace {

constexpr std::array<std::string_view, 20> kOps{
    "ping",          "list_units",     "unit_state",    "move_abs",    "move_rel",    "stop",        "set_energy",
    "get_energy",    "calc_positions", "build_fit",     "fit_report",  "set_mono_param", "read_detector",
    "inject_fault",  "clear_fault",    "start_scan",    "abort_scan",  "scan_status", "scan_points", "snapshot",
};

static_assert(kOps.size() == std::variant_size_v<Command>);

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorCode::Parse, what); }

/// Typed access to a request's argument object.
class Args {
 public:
  Args(std::string_view op, const Json& args) : op_(op), args_(args) {
    if (!args_.is_null() && !args_.is_object()) parse_error(std::string(op_) + ": args must be an object");
  }

  template <typename T>
  T required(const char* key) const {
    const Json* v = find(key);
    if (!v) parse_error(std::string(op_) + ": missing argument '" + key + "'");
    return convert<T>(*v, key);
  }

  template <typename T>
  std::optional<T> optional(const char* key) const {
    const Json* v = find(key);
    if (!v) return std::nullopt;
    return convert<T>(*v, key);
  }

  template <typename T>
  T get_or(const char* key, T fallback) const {
    return optional<T>(key).value_or(std::move(fallback));
  }

  PositionMode mode() const {
    const auto text = get_or<std::string>("mode", "realtime");
    const auto mode = position_mode_from_string(text);
    if (!mode) parse_error(std::string(op_) + ": mode must be 'fit' or 'realtime'");
    return *mode;
  }

 private:
  const Json* find(const char* key) const {
    if (!args_.is_object()) return nullptr;
    auto it = args_.find(key);
    if (it == args_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  template <typename T>
  T convert(const Json& v, const char* key) const {
    auto wrong = [&](const char* expected) {
      parse_error(std::string(op_) + ": argument '" + key + "' must be " + expected);
    };
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) wrong("a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) wrong("a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::size_t>) {
      // Values built in-process arrive as signed integers; parsed ones as unsigned.
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        wrong("a non-negative integer");
      }
      return v.get<std::size_t>();
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (!v.is_number_integer()) wrong("an integer");
      if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        wrong("a signed 64-bit integer");
      }
      return v.get<std::int64_t>();
    } else {
      static_assert(std::is_same_v<T, double>);
      if (!v.is_number()) wrong("a number");
      return v.get<double>();
    }
  }

  std::string_view op_;
  const Json& args_;
};

}  // namespace

std::string_view op_name(const Command& command) noexcept { return kOps[command.index()]; }

std::span<const std::string_view> op_vocabulary() noexcept { return kOps; }

Command decode_command(std::string_view op, const Json& args_json) {
  const Args a(op, args_json);

  if (op == "ping") return cmd::Ping{};
  if (op == "list_units") return cmd::ListUnits{};
  if (op == "unit_state") return cmd::UnitState{a.required<std::string>("unit")};
  if (op == "move_abs") {
    return cmd::MoveAbs{a.required<std::string>("unit"), a.required<std::int64_t>("steps"), a.get_or("wait", false)};
  }
  if (op == "move_rel") {
    return cmd::MoveRel{a.required<std::string>("unit"), a.required<std::int64_t>("delta"), a.get_or("wait", false)};
  }
  if (op == "stop") return cmd::Stop{a.required<std::string>("unit")};
  if (op == "set_energy") return cmd::SetEnergy{a.required<double>("e_ev"), a.mode(), a.get_or("wait", false)};
  if (op == "get_energy") return cmd::GetEnergy{};
  if (op == "calc_positions") return cmd::CalcPositions{a.required<double>("e_ev"), a.mode()};
  if (op == "build_fit") {
    return cmd::BuildFit{a.required<double>("e_lo"), a.required<double>("e_hi"), a.get_or<std::size_t>("n", 21)};
  }
  if (op == "fit_report") return cmd::FitReport{a.get_or<std::size_t>("n_probe", 1000)};
  if (op == "set_mono_param") return cmd::SetMonoParam{a.required<std::string>("name"), a.required<double>("value")};
  if (op == "read_detector") {
    return cmd::ReadDetector{a.optional<std::string>("unit"), a.required<double>("e_ev"),
                             a.get_or("dwell_s", 1.0)};
  }
  if (op == "inject_fault") {
    return cmd::InjectFault{a.required<std::string>("unit"), a.get_or<std::string>("code", "injected"),
                            a.optional<std::int64_t>("slip_counts")};
  }
  if (op == "clear_fault") return cmd::ClearFault{a.required<std::string>("unit")};
  if (op == "start_scan") {
    scan::ScanPlan plan;
    plan.e_start = a.required<double>("e_start");
    plan.e_end = a.required<double>("e_end");
    plan.step = a.optional<double>("step");
    plan.dwell_s = a.get_or("dwell_s", plan.dwell_s);
    plan.settle_s = a.optional<double>("settle_s");
    plan.mode = a.mode();
    plan.output = a.optional<std::string>("output");
    return cmd::StartScan{std::move(plan)};
  }
  if (op == "abort_scan") return cmd::AbortScan{};
  if (op == "scan_status") return cmd::ScanStatus{};
  if (op == "scan_points") return cmd::ScanPoints{a.get_or<std::size_t>("since", 0)};
  if (op == "snapshot") return cmd::Snapshot{};

  parse_error("unknown op '" + std::string(op) + "'");
}

}  // namespace beamline
