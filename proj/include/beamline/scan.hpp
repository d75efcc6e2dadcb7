#pragma once

// Photon-energy step scans: per point, position both optical axes, wait for
// them to land, settle, read back the real energy from the grating encoder,
// integrate the detector, emit the point.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "beamline/json.hpp"
#include "beamline/kinematics.hpp"

namespace beamline {

/// Source of axis target angles.
enum class PositionMode { Realtime, Fit };

std::string_view to_string(PositionMode mode) noexcept;
std::optional<PositionMode> position_mode_from_string(std::string_view text) noexcept;

}  // namespace beamline

namespace beamline::scan {

struct ScanPlan {
  double e_start = 0.0;
  double e_end = 0.0;
  std::optional<double> step;  // default e_start / resolving_power
  double dwell_s = 0.1;
  std::optional<double> settle_s;
  PositionMode mode = PositionMode::Realtime;
  std::optional<std::string> output;
};

struct NormalizedPlan {
  double e_start = 0.0;
  double e_end = 0.0;
  double step = 0.0;
  double dwell_s = 0.0;
  double settle_s = 0.0;
  PositionMode mode = PositionMode::Realtime;
  std::optional<std::string> output;
  std::size_t n_points = 0;

  double energy_at(std::size_t index) const noexcept { return e_start + static_cast<double>(index) * step; }
};

/// Fills defaults and checks every field; throws Error(E_RANGE) naming the
/// offending field.
NormalizedPlan plan_validate(const ScanPlan& plan, const kinematics::MonoConfig& mono,
                             double resolving_power = 10000.0, double default_settle_s = 0.1);

struct ScanPoint {
  std::size_t index = 0;
  double e_set_ev = 0.0;
  double e_readback_ev = 0.0;
  std::int64_t mirror_steps = 0;
  std::int64_t grating_steps = 0;
  double counts = 0.0;
  double calc_ms = 0.0;
  double t_s = 0.0;

  bool operator==(const ScanPoint&) const = default;
};

enum class ScanState { Idle, Running, Aborted, Done, Failed };

std::string_view to_string(ScanState state) noexcept;

struct ScanStatus {
  ScanState state = ScanState::Idle;
  std::uint64_t scan_id = 0;
  std::size_t index = 0;  // current point (running) or stop point (aborted/failed)
  std::size_t total = 0;
  std::string code;  // failure code when failed

  bool terminal() const noexcept {
    return state == ScanState::Aborted || state == ScanState::Done || state == ScanState::Failed;
  }
};

Json to_json(const ScanPoint& point);
ScanPoint point_from_json(const Json& j);
Json to_json(const ScanStatus& status);
Json to_json(const NormalizedPlan& plan);

inline constexpr std::string_view kCsvHeader = "index,e_set_ev,e_readback_ev,mirror_steps,grating_steps,counts,calc_ms,t_s";

/// Header line plus one row per point, LF endings, shortest round-trip floats.
std::string to_csv(std::span<const ScanPoint> points);
std::vector<ScanPoint> parse_csv(std::string_view text);
/// Throws Error(E_IO) when the file cannot be written.
void persist(std::span<const ScanPoint> points, const std::filesystem::path& path);

/// What the engine needs from the instrument it scans.
class ScanHardware {
 public:
  struct Targets {
    std::int64_t mirror_steps = 0;
    std::int64_t grating_steps = 0;
    double calc_ms = 0.0;
    double move_s = 0.0;
  };
  struct Readback {
    double e_readback_ev = 0.0;
    std::int64_t mirror_steps = 0;
    std::int64_t grating_steps = 0;
  };
  enum class AxesState { Idle, Moving, Fault };

  virtual ~ScanHardware() = default;

  /// Computes targets for e_ev and commands both axes; throws beamline::Error.
  virtual Targets position_axes(double e_ev, PositionMode mode) = 0;
  virtual AxesState axes_state(std::string& fault_code) const = 0;
  virtual Readback read_back() = 0;
  virtual double acquire(double e_ev, double dwell_s) = 0;
  virtual double now() const = 0;
};

class ScanEngine {
 public:
  /// Throws E_BUSY while a scan is running.
  void start(NormalizedPlan plan, ScanHardware& hw);
  /// Takes effect at the next point boundary. Throws E_NO_SCAN unless running.
  void request_abort();
  /// Progresses as far as the hardware allows at hw.now(). Returns true when
  /// the scan reached a terminal state during this call.
  bool step(ScanHardware& hw);
  /// Absolute simulated time of the next timed transition, +inf if none.
  double next_event_time() const noexcept;

  bool running() const noexcept { return status_.state == ScanState::Running; }
  const ScanStatus& status() const noexcept { return status_; }
  const std::vector<ScanPoint>& points() const noexcept { return points_; }
  const std::optional<NormalizedPlan>& plan() const noexcept { return plan_; }

 private:
  enum class Phase { Position, Moving, Settling, Dwelling };

  void finish(ScanState state, std::string code = {});
  /// Ends the scan as failed("unit_fault") when an axis motor has faulted.
  bool axes_faulted(ScanHardware& hw);

  ScanStatus status_;
  std::optional<NormalizedPlan> plan_;
  std::vector<ScanPoint> points_;
  Phase phase_ = Phase::Position;
  bool abort_requested_ = false;
  double deadline_ = std::numeric_limits<double>::infinity();
  ScanPoint pending_;
  ScanHardware::Targets targets_;
};

}  // namespace beamline::scan
