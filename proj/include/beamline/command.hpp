#pragma once

// Typed device-server commands and the decoder that builds them from a wire
// op name plus its argument object.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "beamline/errors.hpp"
#include "beamline/json.hpp"
#include "beamline/scan.hpp"

namespace beamline {

namespace cmd {

struct Ping {};
struct ListUnits {};
struct UnitState {
  std::string unit;
};
struct MoveAbs {
  std::string unit;
  std::int64_t steps = 0;
  bool wait = false;
};
struct MoveRel {
  std::string unit;
  std::int64_t delta = 0;
  bool wait = false;
};
struct Stop {
  std::string unit;
};
struct SetEnergy {
  double e_ev = 0.0;
  PositionMode mode = PositionMode::Realtime;
  bool wait = false;
};
struct GetEnergy {};
struct CalcPositions {
  double e_ev = 0.0;
  PositionMode mode = PositionMode::Realtime;
};
struct BuildFit {
  double e_lo = 0.0;
  double e_hi = 0.0;
  std::size_t n = 21;
};
struct FitReport {
  std::size_t n_probe = 1000;
};
struct SetMonoParam {
  std::string name;  // c | k | N | hc
  double value = 0.0;
};
struct ReadDetector {
  std::optional<std::string> unit;
  double e_ev = 0.0;
  double dwell_s = 1.0;
};
struct InjectFault {
  std::string unit;
  std::string code;
  std::optional<std::int64_t> slip_counts;  // encoders only
};
struct ClearFault {
  std::string unit;
};
struct StartScan {
  scan::ScanPlan plan;
};
struct AbortScan {};
struct ScanStatus {};
struct ScanPoints {
  std::size_t since = 0;
};
struct Snapshot {};

}  // namespace cmd

using Command = std::variant<cmd::Ping, cmd::ListUnits, cmd::UnitState, cmd::MoveAbs, cmd::MoveRel, cmd::Stop,
                             cmd::SetEnergy, cmd::GetEnergy, cmd::CalcPositions, cmd::BuildFit, cmd::FitReport,
                             cmd::SetMonoParam, cmd::ReadDetector, cmd::InjectFault, cmd::ClearFault,
                             cmd::StartScan, cmd::AbortScan, cmd::ScanStatus, cmd::ScanPoints, cmd::Snapshot>;

/// Wire op name of a command.
std::string_view op_name(const Command& command) noexcept;

/// Every op the device server answers, in documentation order. "attach" is a
/// session-level op handled by the transport and is not listed here.
std::span<const std::string_view> op_vocabulary() noexcept;

/// Throws Error(E_PARSE) for unknown ops, missing fields, or wrong types.
Command decode_command(std::string_view op, const Json& args);

/// Outcome of one command: a result object or a coded error.
struct Reply {
  bool ok = true;
  Json result = Json::object();
  ErrorCode code = ErrorCode::Internal;
  std::string message;

  static Reply success(Json result) { return Reply{true, std::move(result), ErrorCode::Internal, {}}; }
  static Reply failure(ErrorCode code, std::string message) {
    return Reply{false, Json(), code, std::move(message)};
  }
};

}  // namespace beamline
