#pragma once

// Simulated beamline hardware: stepper motors, opto-encoders, a counting
// detector, and the simulation clock that advances them.
//
// All mutating operations either succeed or throw beamline::Error with one of
// E_LIMIT / E_BUSY / E_FAULT / E_NO_UNIT / E_RANGE. Faults are state, not
// crashes: a faulted unit refuses commands until clear_fault().

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "beamline/errors.hpp"

namespace beamline::sim {

enum class MotorState { Idle, Moving, Fault };
enum class UnitKind { Motor, Encoder, Detector };

std::string_view to_string(MotorState state) noexcept;
std::string_view to_string(UnitKind kind) noexcept;

struct MotorParams {
  std::string name;
  std::int64_t position = 0;
  double velocity_sps = 1000.0;
  std::int64_t soft_min = -100000;
  std::int64_t soft_max = 100000;
};

/// Constant-velocity stepper. No acceleration ramp, so tick() is additive.
class Motor {
 public:
  explicit Motor(MotorParams params);

  const std::string& name() const noexcept { return params_.name; }
  std::int64_t position() const noexcept { return position_; }
  std::optional<std::int64_t> target() const noexcept { return target_; }
  MotorState state() const noexcept { return state_; }
  const std::optional<std::string>& fault_code() const noexcept { return fault_; }
  double velocity() const noexcept { return params_.velocity_sps; }
  std::int64_t soft_min() const noexcept { return params_.soft_min; }
  std::int64_t soft_max() const noexcept { return params_.soft_max; }
  bool within_limits(std::int64_t steps) const noexcept {
    return steps >= params_.soft_min && steps <= params_.soft_max;
  }

  /// Returns the simulated move duration in seconds (0 when already there).
  double move_abs(std::int64_t steps);
  double move_rel(std::int64_t delta);
  void stop() noexcept;
  void tick(double dt) noexcept;
  /// Seconds until the current move lands; +inf when not moving.
  double time_to_arrival() const noexcept;

  void inject_fault(std::string code);
  void clear_fault() noexcept;

 private:
  MotorParams params_;
  std::int64_t position_;
  std::optional<std::int64_t> target_;
  std::int64_t origin_ = 0;
  double travelled_ = 0.0;
  MotorState state_ = MotorState::Idle;
  std::optional<std::string> fault_;
};

struct EncoderParams {
  std::string name;
  std::string motor;
  double counts_per_step = 1.0;
  std::int64_t offset_counts = 0;
};

class Encoder {
 public:
  explicit Encoder(EncoderParams params);

  const std::string& name() const noexcept { return params_.name; }
  const std::string& motor() const noexcept { return params_.motor; }
  double counts_per_step() const noexcept { return params_.counts_per_step; }
  std::int64_t offset_counts() const noexcept { return params_.offset_counts; }
  std::int64_t slip_counts() const noexcept { return slip_; }
  void set_slip(std::int64_t counts) noexcept { slip_ = counts; }

  /// round(position * counts_per_step) + offset + slip.
  std::int64_t read(const Motor& motor) const;
  /// Motor steps implied by a reading, assuming no slip.
  double steps_from_counts(std::int64_t counts) const noexcept {
    return static_cast<double>(counts - params_.offset_counts) / params_.counts_per_step;
  }

  bool faulted() const noexcept { return fault_.has_value(); }
  const std::optional<std::string>& fault_code() const noexcept { return fault_; }
  void inject_fault(std::string code) { fault_ = std::move(code); }
  void clear_fault() noexcept {
    fault_.reset();
    slip_ = 0;
  }

 private:
  EncoderParams params_;
  std::int64_t slip_ = 0;
  std::optional<std::string> fault_;
};

struct Peak {
  double center_ev = 0.0;
  double amplitude_cps = 0.0;
  double sigma_ev = 1.0;
};

enum class NoiseKind { None, Poisson };

struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  std::uint64_t seed = 0;
};

struct DetectorParams {
  std::string name;
  double background_cps = 0.0;
  std::vector<Peak> peaks;
  NoiseModel noise;
};

/// Gaussian peaks over a flat background.
class Detector {
 public:
  explicit Detector(DetectorParams params);

  const std::string& name() const noexcept { return params_.name; }
  const DetectorParams& params() const noexcept { return params_; }
  double flux(double energy_ev) const noexcept;
  /// Noiseless: flux * dwell. Poisson: one draw from the seeded generator.
  double read(double energy_ev, double dwell_s);
  std::optional<double> last_reading() const noexcept { return last_; }

  bool faulted() const noexcept { return fault_.has_value(); }
  const std::optional<std::string>& fault_code() const noexcept { return fault_; }
  void inject_fault(std::string code) { fault_ = std::move(code); }
  void clear_fault() noexcept { fault_.reset(); }

 private:
  DetectorParams params_;
  std::mt19937_64 rng_;
  std::optional<double> last_;
  std::optional<std::string> fault_;
};

/// Name-keyed ownership of every simulated unit. Names are unique across kinds.
class UnitRegistry {
 public:
  void add(Motor motor);
  void add(Encoder encoder);
  void add(Detector detector);

  std::optional<UnitKind> kind_of(std::string_view name) const;
  /// Sorted by name.
  std::vector<std::string> names() const;

  Motor& motor(std::string_view name);
  const Motor& motor(std::string_view name) const;
  Encoder& encoder(std::string_view name);
  const Encoder& encoder(std::string_view name) const;
  Detector& detector(std::string_view name);
  const Detector& detector(std::string_view name) const;

  const std::map<std::string, Motor, std::less<>>& motors() const noexcept { return motors_; }
  const std::map<std::string, Encoder, std::less<>>& encoders() const noexcept { return encoders_; }
  const std::map<std::string, Detector, std::less<>>& detectors() const noexcept { return detectors_; }

  std::int64_t encoder_read(std::string_view name) const;

  void tick(double dt) noexcept;
  double next_arrival() const noexcept;

  void inject_fault(std::string_view name, std::string code);
  void clear_fault(std::string_view name);

 private:
  void claim(const std::string& name) const;

  std::map<std::string, Motor, std::less<>> motors_;
  std::map<std::string, Encoder, std::less<>> encoders_;
  std::map<std::string, Detector, std::less<>> detectors_;
};

enum class ClockMode { Realtime, Scaled };

/// Simulated time. Realtime maps wall seconds 1:1; scaled multiplies them.
class SimClock {
 public:
  explicit SimClock(ClockMode mode = ClockMode::Realtime, double factor = 1.0);

  ClockMode mode() const noexcept { return mode_; }
  double factor() const noexcept { return factor_; }
  double to_sim(double wall_dt) const noexcept;
  double now() const noexcept { return now_; }
  void advance(double sim_dt) noexcept;

 private:
  ClockMode mode_;
  double factor_;
  double now_ = 0.0;
};

}  // namespace beamline::sim
