#include "beamline/beamline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace beamline {

namespace {

using kinematics::Failure;
using kinematics::KinematicsError;

constexpr std::size_t kMaxFitSamples = 100000;
constexpr std::size_t kMaxProbes = 100000;

Error translate(const KinematicsError& e) {
  switch (e.failure()) {
    case Failure::Unsolvable:
    case Failure::NonPositiveWavelength:
      return Error(ErrorCode::Unsolvable, e.what());
    default:
      return Error(ErrorCode::Range, e.what());
  }
}

template <typename F>
auto kin(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const KinematicsError& e) {
    throw translate(e);
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

Json fit_json(const kinematics::CubicFit& f) {
  return Json{{"axis", kinematics::to_string(f.axis)},
              {"coefficients", f.coefficients},
              {"e_lo", f.e_lo},
              {"e_hi", f.e_hi},
              {"rms_residual_deg", f.rms_residual_deg},
              {"max_residual_deg", f.max_residual_deg},
              {"sample_count", f.sample_count}};
}

Json mono_json(const kinematics::MonoConfig& m) {
  return Json{{"N", m.line_density},       {"k", m.order},     {"c", m.fixed_focus_ratio},
              {"energy_min", m.energy_min}, {"energy_max", m.energy_max}, {"hc", m.hc}};
}

}  // namespace

std::int64_t angle_to_steps(const AxisMapping& axis, double angle_deg) {
  const double steps = (angle_deg - axis.offset_deg) * axis.steps_per_degree;
  if (!std::isfinite(steps) || std::abs(steps) > 9.0e18) {
    throw Error(ErrorCode::Range, "angle does not map to a step count");
  }
  return std::llround(steps);
}

double steps_to_angle(const AxisMapping& axis, double steps) {
  return steps / axis.steps_per_degree + axis.offset_deg;
}

Beamline::Beamline(BeamlineConfig cfg) : cfg_(std::move(cfg)), started_at_(std::chrono::steady_clock::now()) {
  validate(cfg_);
  for (const auto& m : cfg_.motors) units_.add(sim::Motor(m));
  for (const auto& e : cfg_.encoders) units_.add(sim::Encoder(e));
  units_.add(sim::Detector(cfg_.detector));
}

// --- dispatch ----------------------------------------------------------------

void Beamline::dispatch(const Command& command, const Completion& done) noexcept {
  std::optional<Reply> reply;
  try {
    reply = execute(command, done);
  } catch (const Error& e) {
    reply = Reply::failure(e.code(), e.what());
  } catch (const KinematicsError& e) {
    const Error err = translate(e);
    reply = Reply::failure(err.code(), err.what());
  } catch (const std::exception& e) {
    reply = Reply::failure(ErrorCode::Internal, e.what());
  } catch (...) {
    reply = Reply::failure(ErrorCode::Internal, "unknown failure");
  }
  try {
    resolve_waiters();
    step_scan();
    if (reply) done(std::move(*reply));
  } catch (...) {
  }
}

std::optional<Reply> Beamline::execute(const Command& command, const Completion& done) {
  return std::visit(
      [&](const auto& c) -> std::optional<Reply> {
        using T = std::decay_t<decltype(c)>;

        if constexpr (std::is_same_v<T, cmd::Ping>) {
          return Reply::success(Json{{"server", cfg_.name},
                                     {"uptime_s", elapsed_ms(started_at_) / 1000.0},
                                     {"sim_time_s", clock_now()}});

        } else if constexpr (std::is_same_v<T, cmd::ListUnits>) {
          Json arr = Json::array();
          for (const auto& name : units_.names()) arr.push_back(unit_json(name));
          return Reply::success(Json{{"units", std::move(arr)}});

        } else if constexpr (std::is_same_v<T, cmd::UnitState>) {
          return Reply::success(unit_json(c.unit));

        } else if constexpr (std::is_same_v<T, cmd::MoveAbs> || std::is_same_v<T, cmd::MoveRel>) {
          sim::Motor& m = units_.motor(c.unit);
          if (scan_.running() && is_axis_motor(c.unit)) {
            throw Error(ErrorCode::Busy, "scan in progress owns '" + c.unit + "'");
          }
          double duration = 0.0;
          if constexpr (std::is_same_v<T, cmd::MoveAbs>) {
            duration = m.move_abs(c.steps);
          } else {
            duration = m.move_rel(c.delta);
          }
          Json result{{"unit", m.name()},
                      {"target", m.target().value_or(m.position())},
                      {"duration_s", duration}};
          if (!c.wait) return Reply::success(std::move(result));
          return pending_or(std::vector<std::string>{m.name()}, duration, std::move(result), done);

        } else if constexpr (std::is_same_v<T, cmd::Stop>) {
          units_.motor(c.unit).stop();
          return Reply::success(unit_json(c.unit));

        } else if constexpr (std::is_same_v<T, cmd::SetEnergy>) {
          if (scan_.running()) throw Error(ErrorCode::Busy, "scan active");
          if (!(c.e_ev >= cfg_.mono.energy_min && c.e_ev <= cfg_.mono.energy_max)) {
            throw Error(ErrorCode::Range, "energy outside monochromator range");
          }
          ensure_axes_free(true);
          const AxisTargets t = compute_targets(c.e_ev, c.mode);
          sim::Motor& mirror = units_.motor(cfg_.mirror.motor);
          sim::Motor& grating = units_.motor(cfg_.grating.motor);
          if (!mirror.within_limits(t.mirror_steps) || !grating.within_limits(t.grating_steps)) {
            throw Error(ErrorCode::Limit, "energy maps outside axis soft limits");
          }
          const double longest = std::max(mirror.move_abs(t.mirror_steps), grating.move_abs(t.grating_steps));
          last_mode_ = c.mode;
          Json result{{"e_ev", c.e_ev},
                      {"mode", to_string(c.mode)},
                      {"mirror_steps", t.mirror_steps},
                      {"grating_steps", t.grating_steps},
                      {"mirror_deg", t.mirror_deg},
                      {"grating_deg", t.grating_deg},
                      {"calc_ms", t.calc_ms},
                      {"duration_s", longest}};
          if (!c.wait) return Reply::success(std::move(result));
          return pending_or({mirror.name(), grating.name()}, longest, std::move(result), done);

        } else if constexpr (std::is_same_v<T, cmd::GetEnergy>) {
          const auto e = energy_estimate();
          return Reply::success(Json{{"e_ev", e ? Json(*e) : Json()}, {"mode", to_string(last_mode_)}});

        } else if constexpr (std::is_same_v<T, cmd::CalcPositions>) {
          const AxisTargets t = compute_targets(c.e_ev, c.mode);
          Json result{{"e_ev", c.e_ev},
                      {"mode", to_string(c.mode)},
                      {"mirror_deg", t.mirror_deg},
                      {"grating_deg", t.grating_deg},
                      {"mirror_steps", t.mirror_steps},
                      {"grating_steps", t.grating_steps},
                      {"calc_ms", t.calc_ms}};
          if (t.solution) {
            result["alpha_deg"] = t.solution->alpha_deg;
            result["beta_deg"] = t.solution->beta_deg;
          }
          return Reply::success(std::move(result));

        } else if constexpr (std::is_same_v<T, cmd::BuildFit>) {
          if (scan_.running()) throw Error(ErrorCode::Busy, "scan active");
          if (c.n > kMaxFitSamples) throw Error(ErrorCode::Range, "too many fit samples");
          fits_ = kin([&] { return kinematics::build_fit_table(cfg_.mono, c.e_lo, c.e_hi, c.n); });
          fits_stale_ = false;
          return Reply::success(fits_json());

        } else if constexpr (std::is_same_v<T, cmd::FitReport>) {
          if (!fits_) throw Error(ErrorCode::StaleFit, "no fit has been built");
          if (c.n_probe > kMaxProbes) throw Error(ErrorCode::Range, "too many probes");
          const auto r = kin([&] { return kinematics::fit_error_report(cfg_.mono, *fits_, c.n_probe); });
          return Reply::success(Json{
              {"stale", fits_stale_},
              {"n_probe", r.probes},
              {"mirror", {{"max_dev_deg", r.mirror.max_dev_deg}, {"rms_dev_deg", r.mirror.rms_dev_deg}}},
              {"grating", {{"max_dev_deg", r.grating.max_dev_deg}, {"rms_dev_deg", r.grating.rms_dev_deg}}}});

        } else if constexpr (std::is_same_v<T, cmd::SetMonoParam>) {
          if (scan_.running()) throw Error(ErrorCode::Busy, "scan active");
          kinematics::MonoConfig next = cfg_.mono;
          if (c.name == "c") {
            next.fixed_focus_ratio = c.value;
          } else if (c.name == "N") {
            next.line_density = c.value;
          } else if (c.name == "hc") {
            next.hc = c.value;
          } else if (c.name == "k") {
            if (!(std::abs(c.value) <= 1e6) || std::trunc(c.value) != c.value) {
              throw Error(ErrorCode::Range, "k must be an integer");
            }
            next.order = static_cast<int>(c.value);
          } else {
            throw Error(ErrorCode::Range, "unknown monochromator parameter '" + c.name + "' (expected c, k, N, hc)");
          }
          kin([&] { next.validate(); });
          cfg_.mono = next;
          if (fits_) fits_stale_ = true;
          return Reply::success(Json{{"mono", mono_json(cfg_.mono)}, {"fits_stale", fits_stale_}});

        } else if constexpr (std::is_same_v<T, cmd::ReadDetector>) {
          const std::string& name = c.unit ? *c.unit : cfg_.detector.name;
          const double counts = units_.detector(name).read(c.e_ev, c.dwell_s);
          return Reply::success(Json{{"unit", name}, {"e_ev", c.e_ev}, {"dwell_s", c.dwell_s}, {"counts", counts}});

        } else if constexpr (std::is_same_v<T, cmd::InjectFault>) {
          const auto kind = units_.kind_of(c.unit);
          if (!kind) throw Error(ErrorCode::NoUnit, "no unit named '" + c.unit + "'");
          if (c.slip_counts) {
            if (*kind != sim::UnitKind::Encoder) throw Error(ErrorCode::Range, "slip applies to encoders only");
            units_.encoder(c.unit).set_slip(*c.slip_counts);
          } else {
            units_.inject_fault(c.unit, c.code);
          }
          return Reply::success(unit_json(c.unit));

        } else if constexpr (std::is_same_v<T, cmd::ClearFault>) {
          if (!units_.kind_of(c.unit)) throw Error(ErrorCode::NoUnit, "no unit named '" + c.unit + "'");
          units_.clear_fault(c.unit);
          return Reply::success(unit_json(c.unit));

        } else if constexpr (std::is_same_v<T, cmd::StartScan>) {
          if (scan_.running()) throw Error(ErrorCode::Busy, "a scan is already running");
          scan::NormalizedPlan plan =
              scan::plan_validate(c.plan, cfg_.mono, cfg_.resolving_power, cfg_.default_settle_s);
          if (plan.mode == PositionMode::Fit) {
            if (!fits_ || fits_stale_) throw Error(ErrorCode::StaleFit, "fit mode needs a current fit");
            for (const auto* f : {&fits_->mirror, &fits_->grating}) {
              if (plan.e_start < f->e_lo || plan.e_end > f->e_hi) {
                throw Error(ErrorCode::Range, "plan field 'e_end': scan exceeds fit domain");
              }
            }
          }
          ensure_axes_free(true);
          if (plan.output) scan::persist({}, *plan.output);
          persist_error_.reset();
          scan_.start(plan, *this);
          Json result{{"scan_id", scan_.status().scan_id}, {"plan", scan::to_json(plan)}};
          if (scan_.status().terminal()) on_scan_terminal();
          return Reply::success(std::move(result));

        } else if constexpr (std::is_same_v<T, cmd::AbortScan>) {
          scan_.request_abort();
          abort_waiters_.push_back(done);
          return std::nullopt;

        } else if constexpr (std::is_same_v<T, cmd::ScanStatus>) {
          Json j = scan::to_json(scan_.status());
          j["points"] = scan_.points().size();
          if (persist_error_) j["persist_error"] = *persist_error_;
          return Reply::success(std::move(j));

        } else if constexpr (std::is_same_v<T, cmd::ScanPoints>) {
          Json pts = Json::array();
          const auto& all = scan_.points();
          for (std::size_t i = c.since; i < all.size(); ++i) pts.push_back(scan::to_json(all[i]));
          return Reply::success(Json{{"scan_id", scan_.status().scan_id},
                                     {"status", scan::to_json(scan_.status())},
                                     {"points", std::move(pts)}});

        } else if constexpr (std::is_same_v<T, cmd::Snapshot>) {
          return Reply::success(snapshot());
        }
      },
      command);
}

// --- helpers -----------------------------------------------------------------

bool Beamline::is_axis_motor(std::string_view name) const noexcept {
  return name == cfg_.mirror.motor || name == cfg_.grating.motor;
}

void Beamline::ensure_axes_free(bool check_motion) const {
  for (const auto* axis : {&cfg_.mirror, &cfg_.grating}) {
    const sim::Motor& m = units_.motor(axis->motor);
    if (m.state() == sim::MotorState::Fault) {
      throw Error(ErrorCode::Fault, "axis motor '" + m.name() + "' faulted: " + m.fault_code().value_or("?"));
    }
    if (check_motion && m.state() == sim::MotorState::Moving) {
      throw Error(ErrorCode::Busy, "axis motor '" + m.name() + "' is moving");
    }
  }
}

Json Beamline::unit_json(const std::string& name) const {
  const auto kind = units_.kind_of(name);
  if (!kind) throw Error(ErrorCode::NoUnit, "no unit named '" + name + "'");
  Json j{{"name", name}, {"kind", sim::to_string(*kind)}};
  switch (*kind) {
    case sim::UnitKind::Motor: {
      const sim::Motor& m = units_.motor(name);
      j["state"] = sim::to_string(m.state());
      j["position"] = m.position();
      j["target"] = m.target() ? Json(*m.target()) : Json();
      j["velocity_sps"] = m.velocity();
      j["soft_min"] = m.soft_min();
      j["soft_max"] = m.soft_max();
      j["fault"] = m.fault_code() ? Json(*m.fault_code()) : Json();
      break;
    }
    case sim::UnitKind::Encoder: {
      const sim::Encoder& e = units_.encoder(name);
      j["state"] = e.faulted() ? "fault" : "ok";
      Json reading;
      try {
        reading = units_.encoder_read(name);
      } catch (const Error&) {
      }
      j["reading"] = reading;
      j["motor"] = e.motor();
      j["slip_counts"] = e.slip_counts();
      j["fault"] = e.fault_code() ? Json(*e.fault_code()) : Json();
      break;
    }
    case sim::UnitKind::Detector: {
      const sim::Detector& d = units_.detector(name);
      j["state"] = d.faulted() ? "fault" : "ok";
      j["reading"] = d.last_reading() ? Json(*d.last_reading()) : Json();
      j["fault"] = d.fault_code() ? Json(*d.fault_code()) : Json();
      break;
    }
  }
  return j;
}

Json Beamline::fits_json() const {
  if (!fits_) return Json();
  return Json{{"stale", fits_stale_}, {"mirror", fit_json(fits_->mirror)}, {"grating", fit_json(fits_->grating)}};
}

Json Beamline::snapshot() const {
  Json units = Json::array();
  for (const auto& name : units_.names()) units.push_back(unit_json(name));
  const auto energy = energy_estimate();
  Json scan = scan::to_json(scan_.status());
  scan["points"] = scan_.points().size();
  return Json{{"server", cfg_.name},
              {"uptime_s", elapsed_ms(started_at_) / 1000.0},
              {"sim_time_s", clock_now()},
              {"units", std::move(units)},
              {"energy_ev", energy ? Json(*energy) : Json()},
              {"mode", to_string(last_mode_)},
              {"mono", mono_json(cfg_.mono)},
              {"fits", !fits_ ? "absent" : (fits_stale_ ? "stale" : "fresh")},
              {"fits_stale", fits_stale_},
              {"scan", std::move(scan)}};
}

std::optional<double> Beamline::energy_estimate() const {
  try {
    const sim::Encoder& enc = units_.encoder(cfg_.grating.encoder);
    const double steps = enc.steps_from_counts(units_.encoder_read(cfg_.grating.encoder));
    const double beta = steps_to_angle(cfg_.grating, steps) - 90.0;
    return kinematics::energy_from_beta(cfg_.mono, beta);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

AxisTargets Beamline::compute_targets(double e_ev, PositionMode mode) const {
  AxisTargets t;
  const auto t0 = std::chrono::steady_clock::now();
  kin([&] {
    if (mode == PositionMode::Realtime) {
      const auto sol = kinematics::solve_diffraction(cfg_.mono, e_ev);
      t.mirror_deg = sol.mirror_grazing_deg;
      t.grating_deg = sol.grating_exit_grazing_deg;
      t.solution = sol;
    } else {
      if (!fits_ || fits_stale_) {
        throw Error(ErrorCode::StaleFit, fits_ ? "fits are stale; rebuild with build_fit" : "no fit has been built");
      }
      t.mirror_deg = kinematics::eval_fit(fits_->mirror, e_ev);
      t.grating_deg = kinematics::eval_fit(fits_->grating, e_ev);
    }
  });
  t.calc_ms = elapsed_ms(t0);
  t.mirror_steps = angle_to_steps(cfg_.mirror, t.mirror_deg);
  t.grating_steps = angle_to_steps(cfg_.grating, t.grating_deg);
  return t;
}

// --- waiting and time --------------------------------------------------------

std::optional<Reply> Beamline::pending_or(std::vector<std::string> motors, double longest_move_s, Json result,
                                          const Completion& done) {
  const bool all_idle = std::all_of(motors.begin(), motors.end(), [&](const std::string& m) {
    return units_.motor(m).state() == sim::MotorState::Idle;
  });
  if (all_idle) return Reply::success(std::move(result));
  waiters_.push_back(MoveWaiter{std::move(motors), clock_now() + longest_move_s * 2.0 + 5.0, std::move(result), done});
  return std::nullopt;
}

void Beamline::resolve_waiters() {
  std::vector<std::pair<Completion, Reply>> ready;
  for (auto it = waiters_.begin(); it != waiters_.end();) {
    std::optional<Reply> reply;
    bool all_idle = true;
    for (const auto& name : it->motors) {
      const sim::Motor& m = units_.motor(name);
      if (m.state() == sim::MotorState::Fault) {
        reply = Reply::failure(ErrorCode::Fault, "motor '" + name + "' faulted: " + m.fault_code().value_or("?"));
        break;
      }
      if (m.state() == sim::MotorState::Moving) all_idle = false;
    }
    if (!reply && all_idle) {
      if (it->motors.size() == 1) it->result["position"] = units_.motor(it->motors.front()).position();
      reply = Reply::success(std::move(it->result));
    }
    if (!reply && clock_now() >= it->deadline) reply = Reply::failure(ErrorCode::Fault, "move_timeout");
    if (reply) {
      ready.emplace_back(std::move(it->done), std::move(*reply));
      it = waiters_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto& [done, reply] : ready) done(std::move(reply));
}

void Beamline::step_scan() {
  if (scan_.step(*this)) on_scan_terminal();
}

void Beamline::on_scan_terminal() {
  const auto& plan = scan_.plan();
  if (plan && plan->output) {
    try {
      scan::persist(scan_.points(), *plan->output);
    } catch (const Error& e) {
      persist_error_ = e.what();
    }
  }
  Json status = scan::to_json(scan_.status());
  status["points"] = scan_.points().size();
  auto waiters = std::move(abort_waiters_);
  abort_waiters_.clear();
  for (auto& done : waiters) done(Reply::success(status));
}

void Beamline::advance(double dt) noexcept {
  double remaining = dt > 0.0 && std::isfinite(dt) ? dt : 0.0;
  try {
    for (int guard = 0; guard < 10'000'000; ++guard) {
      resolve_waiters();
      step_scan();
      if (!(remaining > 0.0)) break;

      double deadline_abs = scan_.next_event_time();
      for (const auto& w : waiters_) deadline_abs = std::min(deadline_abs, w.deadline);
      const double to_deadline = std::max(0.0, deadline_abs - clock_now());
      const double to_arrival = units_.next_arrival();

      const double step = std::min({to_deadline, to_arrival, remaining});
      units_.tick(step);
      remaining -= step;
      if (step == to_deadline && to_deadline <= to_arrival) {
        std::int64_t at = std::llround(deadline_abs * 1e9);
        if (static_cast<double>(at) * 1e-9 < deadline_abs) ++at;  // land on or past the deadline
        clock_ns_ = std::max<std::int64_t>(clock_ns_ + std::llround(step * 1e9), at);
      } else {
        clock_ns_ += std::llround(step * 1e9);
      }
    }
  } catch (...) {
  }
}

void Beamline::fail_pending(const Reply& reply) noexcept {
  auto waiters = std::move(waiters_);
  auto aborts = std::move(abort_waiters_);
  waiters_.clear();
  abort_waiters_.clear();
  for (auto& w : waiters) {
    try {
      w.done(reply);
    } catch (...) {
    }
  }
  for (auto& done : aborts) {
    try {
      done(reply);
    } catch (...) {
    }
  }
}

// --- scan::ScanHardware --------------------------------------------------------

scan::ScanHardware::Targets Beamline::position_axes(double e_ev, PositionMode mode) {
  ensure_axes_free(true);
  const AxisTargets t = compute_targets(e_ev, mode);
  sim::Motor& mirror = units_.motor(cfg_.mirror.motor);
  sim::Motor& grating = units_.motor(cfg_.grating.motor);
  if (!mirror.within_limits(t.mirror_steps) || !grating.within_limits(t.grating_steps)) {
    throw Error(ErrorCode::Limit, "scan energy maps outside axis soft limits");
  }
  Targets out;
  out.mirror_steps = t.mirror_steps;
  out.grating_steps = t.grating_steps;
  out.calc_ms = t.calc_ms;
  out.move_s = std::max(mirror.move_abs(t.mirror_steps), grating.move_abs(t.grating_steps));
  return out;
}

scan::ScanHardware::AxesState Beamline::axes_state(std::string& fault_code) const {
  AxesState state = AxesState::Idle;
  for (const auto* axis : {&cfg_.mirror, &cfg_.grating}) {
    const sim::Motor& m = units_.motor(axis->motor);
    if (m.state() == sim::MotorState::Fault) {
      fault_code = m.fault_code().value_or("fault");
      return AxesState::Fault;
    }
    if (m.state() == sim::MotorState::Moving) state = AxesState::Moving;
  }
  return state;
}

scan::ScanHardware::Readback Beamline::read_back() {
  const sim::Encoder& menc = units_.encoder(cfg_.mirror.encoder);
  const sim::Encoder& genc = units_.encoder(cfg_.grating.encoder);
  const double mirror_steps = menc.steps_from_counts(units_.encoder_read(cfg_.mirror.encoder));
  const double grating_steps = genc.steps_from_counts(units_.encoder_read(cfg_.grating.encoder));
  Readback rb;
  rb.mirror_steps = std::llround(mirror_steps);
  rb.grating_steps = std::llround(grating_steps);
  rb.e_readback_ev =
      kin([&] { return kinematics::energy_from_beta(cfg_.mono, steps_to_angle(cfg_.grating, grating_steps) - 90.0); });
  return rb;
}

double Beamline::acquire(double e_ev, double dwell_s) {
  return units_.detector(cfg_.detector.name).read(e_ev, dwell_s);
}

}  // namespace beamline
