#include "beamline/hardware.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace beamline::sim {

namespace {

// Tolerance on accumulated travel so that sub-stepped ticks land exactly
// where one combined tick would.
constexpr double kTravelEps = 1e-9;

std::string quoted(std::string_view name) { return "'" + std::string(name) + "'"; }

}  // namespace

std::string_view to_string(MotorState state) noexcept {
  switch (state) {
    case MotorState::Idle: return "idle";
    case MotorState::Moving: return "moving";
    case MotorState::Fault: return "fault";
  }
  return "fault";
}

std::string_view to_string(UnitKind kind) noexcept {
  switch (kind) {
    case UnitKind::Motor: return "motor";
    case UnitKind::Encoder: return "encoder";
    case UnitKind::Detector: return "detector";
  }
  return "motor";
}

// --- Motor -------------------------------------------------------------------

Motor::Motor(MotorParams params) : params_(std::move(params)), position_(params_.position) {
  if (params_.name.empty()) throw Error(ErrorCode::Range, "motor name must not be empty");
  if (!(params_.velocity_sps > 0.0) || !std::isfinite(params_.velocity_sps)) {
    throw Error(ErrorCode::Range, "motor " + quoted(params_.name) + ": velocity_sps must be > 0");
  }
  if (params_.soft_min > params_.soft_max) {
    throw Error(ErrorCode::Range, "motor " + quoted(params_.name) + ": soft_min exceeds soft_max");
  }
  if (!within_limits(position_)) {
    throw Error(ErrorCode::Limit, "motor " + quoted(params_.name) + ": home position outside soft limits");
  }
}

double Motor::move_abs(std::int64_t steps) {
  if (state_ == MotorState::Fault) {
    throw Error(ErrorCode::Fault, "motor " + quoted(name()) + " faulted: " + fault_.value_or("?"));
  }
  if (state_ == MotorState::Moving) {
    throw Error(ErrorCode::Busy, "motor " + quoted(name()) + " is moving");
  }
  if (!within_limits(steps)) {
    throw Error(ErrorCode::Limit, "target " + std::to_string(steps) + " outside soft limits of " + quoted(name()));
  }
  if (steps == position_) return 0.0;

  origin_ = position_;
  target_ = steps;
  travelled_ = 0.0;
  state_ = MotorState::Moving;
  return std::abs(static_cast<double>(steps - position_)) / params_.velocity_sps;
}

double Motor::move_rel(std::int64_t delta) {
  std::int64_t target = 0;
  if (__builtin_add_overflow(position_, delta, &target)) {
    if (state_ == MotorState::Fault) return move_abs(position_);  // reports E_FAULT
    throw Error(ErrorCode::Limit, "relative move overflows for " + quoted(name()));
  }
  return move_abs(target);
}

void Motor::stop() noexcept {
  if (state_ != MotorState::Moving) return;
  target_.reset();
  travelled_ = 0.0;
  state_ = MotorState::Idle;
}

void Motor::tick(double dt) noexcept {
  if (state_ != MotorState::Moving || !(dt > 0.0)) return;
  const std::int64_t goal = *target_;
  const double total = std::abs(static_cast<double>(goal - origin_));
  travelled_ += params_.velocity_sps * dt;
  if (travelled_ + kTravelEps >= total) {
    position_ = goal;
    target_.reset();
    travelled_ = 0.0;
    state_ = MotorState::Idle;
    return;
  }
  const auto done = static_cast<std::int64_t>(std::floor(travelled_ + kTravelEps));
  position_ = goal > origin_ ? origin_ + done : origin_ - done;
}

double Motor::time_to_arrival() const noexcept {
  if (state_ != MotorState::Moving) return std::numeric_limits<double>::infinity();
  const double total = std::abs(static_cast<double>(*target_ - origin_));
  return std::max(0.0, total - travelled_) / params_.velocity_sps;
}

void Motor::inject_fault(std::string code) {
  target_.reset();
  travelled_ = 0.0;
  state_ = MotorState::Fault;
  fault_ = std::move(code);
}

void Motor::clear_fault() noexcept {
  if (state_ != MotorState::Fault) return;
  state_ = MotorState::Idle;
  fault_.reset();
}

// --- Encoder -----------------------------------------------------------------

Encoder::Encoder(EncoderParams params) : params_(std::move(params)) {
  if (params_.name.empty()) throw Error(ErrorCode::Range, "encoder name must not be empty");
  if (params_.counts_per_step == 0.0 || !std::isfinite(params_.counts_per_step)) {
    throw Error(ErrorCode::Range, "encoder " + quoted(params_.name) + ": counts_per_step must be non-zero");
  }
}

std::int64_t Encoder::read(const Motor& motor) const {
  if (fault_) {
    throw Error(ErrorCode::Fault, "encoder " + quoted(name()) + " faulted: " + *fault_);
  }
  const auto scaled = std::llround(static_cast<double>(motor.position()) * params_.counts_per_step);
  return scaled + params_.offset_counts + slip_;
}

// --- Detector ----------------------------------------------------------------

Detector::Detector(DetectorParams params) : params_(std::move(params)), rng_(params_.noise.seed) {
  if (params_.name.empty()) throw Error(ErrorCode::Range, "detector name must not be empty");
  if (!(params_.background_cps >= 0.0)) {
    throw Error(ErrorCode::Range, "detector " + quoted(params_.name) + ": background_cps must be >= 0");
  }
  for (const auto& p : params_.peaks) {
    if (!(p.amplitude_cps >= 0.0) || !(p.sigma_ev > 0.0)) {
      throw Error(ErrorCode::Range, "detector " + quoted(params_.name) + ": peaks need amplitude >= 0 and sigma > 0");
    }
  }
}

double Detector::flux(double energy_ev) const noexcept {
  double total = params_.background_cps;
  for (const auto& p : params_.peaks) {
    const double z = (energy_ev - p.center_ev) / p.sigma_ev;
    total += p.amplitude_cps * std::exp(-0.5 * z * z);
  }
  return total;
}

double Detector::read(double energy_ev, double dwell_s) {
  if (fault_) {
    throw Error(ErrorCode::Fault, "detector " + quoted(name()) + " faulted: " + *fault_);
  }
  if (!(dwell_s > 0.0) || !std::isfinite(dwell_s)) {
    throw Error(ErrorCode::Range, "dwell must be > 0");
  }
  const double mean = flux(energy_ev) * dwell_s;
  if (!std::isfinite(mean)) throw Error(ErrorCode::Range, "detector flux is not finite at this energy");
  double counts = mean;
  if (params_.noise.kind == NoiseKind::Poisson) {
    counts = 0.0;
    if (mean > 0.0) {
      std::poisson_distribution<std::int64_t> draw(mean);
      counts = static_cast<double>(draw(rng_));
    }
  }
  last_ = counts;
  return counts;
}

// --- UnitRegistry ------------------------------------------------------------

void UnitRegistry::claim(const std::string& name) const {
  if (kind_of(name)) throw Error(ErrorCode::Range, "duplicate unit name " + quoted(name));
}

void UnitRegistry::add(Motor motor) {
  claim(motor.name());
  auto name = motor.name();
  motors_.emplace(std::move(name), std::move(motor));
}

void UnitRegistry::add(Encoder encoder) {
  claim(encoder.name());
  auto name = encoder.name();
  encoders_.emplace(std::move(name), std::move(encoder));
}

void UnitRegistry::add(Detector detector) {
  claim(detector.name());
  auto name = detector.name();
  detectors_.emplace(std::move(name), std::move(detector));
}

std::optional<UnitKind> UnitRegistry::kind_of(std::string_view name) const {
  if (motors_.find(name) != motors_.end()) return UnitKind::Motor;
  if (encoders_.find(name) != encoders_.end()) return UnitKind::Encoder;
  if (detectors_.find(name) != detectors_.end()) return UnitKind::Detector;
  return std::nullopt;
}

std::vector<std::string> UnitRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : motors_) out.push_back(n);
  for (const auto& [n, _] : encoders_) out.push_back(n);
  for (const auto& [n, _] : detectors_) out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

template <typename Map>
auto& lookup(Map& map, std::string_view name, std::string_view kind) {
  auto it = map.find(name);
  if (it == map.end()) {
    throw Error(ErrorCode::NoUnit, "no " + std::string(kind) + " named " + quoted(name));
  }
  return it->second;
}

}  // namespace

Motor& UnitRegistry::motor(std::string_view name) { return lookup(motors_, name, "motor"); }
const Motor& UnitRegistry::motor(std::string_view name) const { return lookup(motors_, name, "motor"); }
Encoder& UnitRegistry::encoder(std::string_view name) { return lookup(encoders_, name, "encoder"); }
const Encoder& UnitRegistry::encoder(std::string_view name) const { return lookup(encoders_, name, "encoder"); }
Detector& UnitRegistry::detector(std::string_view name) { return lookup(detectors_, name, "detector"); }
const Detector& UnitRegistry::detector(std::string_view name) const {
  return lookup(detectors_, name, "detector");
}

std::int64_t UnitRegistry::encoder_read(std::string_view name) const {
  const Encoder& enc = encoder(name);
  auto it = motors_.find(enc.motor());
  if (it == motors_.end()) {
    throw Error(ErrorCode::NoUnit, "encoder " + quoted(name) + " bound to missing motor " + quoted(enc.motor()));
  }
  return enc.read(it->second);
}

void UnitRegistry::tick(double dt) noexcept {
  for (auto& [_, m] : motors_) m.tick(dt);
}

double UnitRegistry::next_arrival() const noexcept {
  double next = std::numeric_limits<double>::infinity();
  for (const auto& [_, m] : motors_) next = std::min(next, m.time_to_arrival());
  return next;
}

void UnitRegistry::inject_fault(std::string_view name, std::string code) {
  if (code.empty()) code = "injected";
  switch (kind_of(name).value_or(UnitKind::Motor)) {
    case UnitKind::Motor: motor(name).inject_fault(std::move(code)); break;
    case UnitKind::Encoder: encoder(name).inject_fault(std::move(code)); break;
    case UnitKind::Detector: detector(name).inject_fault(std::move(code)); break;
  }
}

void UnitRegistry::clear_fault(std::string_view name) {
  switch (kind_of(name).value_or(UnitKind::Motor)) {
    case UnitKind::Motor: motor(name).clear_fault(); break;
    case UnitKind::Encoder: encoder(name).clear_fault(); break;
    case UnitKind::Detector: detector(name).clear_fault(); break;
  }
}

// --- SimClock ----------------------------------------------------------------

SimClock::SimClock(ClockMode mode, double factor) : mode_(mode), factor_(mode == ClockMode::Realtime ? 1.0 : factor) {
  if (!(factor_ > 0.0) || !std::isfinite(factor_)) {
    throw Error(ErrorCode::Range, "clock scale factor must be > 0");
  }
}

double SimClock::to_sim(double wall_dt) const noexcept { return wall_dt > 0.0 ? wall_dt * factor_ : 0.0; }

void SimClock::advance(double sim_dt) noexcept {
  if (sim_dt > 0.0) now_ += sim_dt;
}

}  // namespace beamline::sim
