#pragma once

// The state of one beamline: its units, monochromator parameters, position
// fits, axis coupling and scan engine. Not thread-safe; DeviceServer owns one
// and serializes every call onto a single thread.

#include <chrono>
#include <functional>
#include <optional>
#include <vector>

#include "beamline/command.hpp"
#include "beamline/config.hpp"
#include "beamline/hardware.hpp"
#include "beamline/kinematics.hpp"
#include "beamline/scan.hpp"

namespace beamline {

struct AxisTargets {
  double mirror_deg = 0.0;
  double grating_deg = 0.0;
  std::int64_t mirror_steps = 0;
  std::int64_t grating_steps = 0;
  double calc_ms = 0.0;
  std::optional<kinematics::OpticsSolution> solution;  // realtime mode only
};

/// steps = round((angle - offset) * steps_per_degree), ties away from zero.
std::int64_t angle_to_steps(const AxisMapping& axis, double angle_deg);
double steps_to_angle(const AxisMapping& axis, double steps);

class Beamline final : private scan::ScanHardware {
 public:
  using Completion = std::function<void(Reply)>;

  /// Throws ConfigError.
  explicit Beamline(BeamlineConfig cfg);

  /// Applies a command. Immediate commands call `done` before returning;
  /// waiting ones (move/set_energy with wait, abort_scan) call it from a later
  /// advance(). Never throws: every failure becomes an error Reply.
  void dispatch(const Command& command, const Completion& done) noexcept;

  /// Advances simulated time by dt seconds, sub-stepping to every motor
  /// arrival and scan deadline so results do not depend on tick size.
  void advance(double dt) noexcept;

  Json snapshot() const;
  /// Energy implied by the grating encoder, if it maps to a valid angle.
  std::optional<double> energy_estimate() const;
  AxisTargets compute_targets(double e_ev, PositionMode mode) const;

  double sim_time() const noexcept { return clock_now(); }
  const BeamlineConfig& config() const noexcept { return cfg_; }
  const kinematics::MonoConfig& mono() const noexcept { return cfg_.mono; }
  const sim::UnitRegistry& units() const noexcept { return units_; }
  const scan::ScanEngine& scanner() const noexcept { return scan_; }
  const std::optional<kinematics::FitPair>& fits() const noexcept { return fits_; }
  bool fits_stale() const noexcept { return fits_stale_; }
  std::size_t pending_waits() const noexcept { return waiters_.size() + abort_waiters_.size(); }

  /// Answers every deferred command with `reply`; used at shutdown.
  void fail_pending(const Reply& reply) noexcept;

 private:
  struct MoveWaiter {
    std::vector<std::string> motors;
    double deadline;
    Json result;
    Completion done;
  };

  /// nullopt when a waiter will deliver the reply later.
  std::optional<Reply> execute(const Command& command, const Completion& done);

  Json unit_json(const std::string& name) const;
  Json fits_json() const;
  void ensure_axes_free(bool check_motion) const;
  bool is_axis_motor(std::string_view name) const noexcept;
  std::optional<Reply> pending_or(std::vector<std::string> motors, double longest_move_s, Json result,
                                  const Completion& done);
  void resolve_waiters();
  void on_scan_terminal();
  void step_scan();

  // scan::ScanHardware
  Targets position_axes(double e_ev, PositionMode mode) override;
  AxesState axes_state(std::string& fault_code) const override;
  Readback read_back() override;
  double acquire(double e_ev, double dwell_s) override;
  double now() const override { return clock_now(); }

  BeamlineConfig cfg_;
  sim::UnitRegistry units_;
  std::optional<kinematics::FitPair> fits_;
  bool fits_stale_ = false;
  PositionMode last_mode_ = PositionMode::Realtime;
  scan::ScanEngine scan_;
  std::optional<std::string> persist_error_;
  std::vector<MoveWaiter> waiters_;
  std::vector<Completion> abort_waiters_;
  // Whole nanoseconds, so the timeline does not depend on how advance() is chunked.
  std::int64_t clock_ns_ = 0;
  double clock_now() const noexcept { return static_cast<double>(clock_ns_) * 1e-9; }
  std::chrono::steady_clock::time_point started_at_;
};

}  // namespace beamline
