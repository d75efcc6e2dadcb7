#include "beamline/scan.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "beamline/errors.hpp"

namespace beamline {

std::string_view to_string(PositionMode mode) noexcept {
  return mode == PositionMode::Fit ? "fit" : "realtime";
}

std::optional<PositionMode> position_mode_from_string(std::string_view text) noexcept {
  if (text == "realtime") return PositionMode::Realtime;
  if (text == "fit") return PositionMode::Fit;
  return std::nullopt;
}

}  // namespace beamline

namespace beamline::scan {

namespace {

constexpr std::size_t kMaxPoints = 1'000'000;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::Range, "plan field '" + field + "': " + why);
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

void append_number(std::string& out, std::int64_t v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

template <typename T>
T parse_field(std::string_view text, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Parse, "csv line " + std::to_string(line) + ": bad field '" + std::string(text) + "'");
  }
  return value;
}

std::string failure_code(const Error& e) {
  if (e.code() == ErrorCode::Fault) return "unit_fault";
  std::string code(to_string(e.code()));
  if (code.rfind("E_", 0) == 0) code.erase(0, 2);
  for (auto& ch : code) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return code;
}

}  // namespace

NormalizedPlan plan_validate(const ScanPlan& plan, const kinematics::MonoConfig& mono, double resolving_power,
                             double default_settle_s) {
  auto in_range = [&](double e) { return std::isfinite(e) && e >= mono.energy_min && e <= mono.energy_max; };
  if (!in_range(plan.e_start)) bad_field("e_start", "outside monochromator energy range");
  if (!in_range(plan.e_end)) bad_field("e_end", "outside monochromator energy range");
  if (!(plan.e_start < plan.e_end)) bad_field("e_end", "must exceed e_start");

  NormalizedPlan out;
  out.e_start = plan.e_start;
  out.e_end = plan.e_end;
  out.step = plan.step.value_or(plan.e_start / resolving_power);
  if (!(out.step > 0.0) || !std::isfinite(out.step)) bad_field("step", "must be > 0");
  out.dwell_s = plan.dwell_s;
  if (!(out.dwell_s > 0.0) || !std::isfinite(out.dwell_s)) bad_field("dwell_s", "must be > 0");
  out.settle_s = plan.settle_s.value_or(default_settle_s);
  if (!(out.settle_s >= 0.0) || !std::isfinite(out.settle_s)) bad_field("settle_s", "must be >= 0");
  out.mode = plan.mode;
  out.output = plan.output;

  const double intervals = std::floor((plan.e_end - plan.e_start) / out.step + 1e-9);
  if (intervals + 1.0 > static_cast<double>(kMaxPoints)) bad_field("step", "too many points");
  out.n_points = static_cast<std::size_t>(intervals) + 1;
  if (out.n_points < 2) bad_field("step", "plan yields fewer than 2 points");
  return out;
}

std::string_view to_string(ScanState state) noexcept {
  switch (state) {
    case ScanState::Idle: return "idle";
    case ScanState::Running: return "running";
    case ScanState::Aborted: return "aborted";
    case ScanState::Done: return "done";
    case ScanState::Failed: return "failed";
  }
  return "idle";
}

Json to_json(const ScanPoint& p) {
  return Json{{"index", p.index},
              {"e_set_ev", p.e_set_ev},
              {"e_readback_ev", p.e_readback_ev},
              {"mirror_steps", p.mirror_steps},
              {"grating_steps", p.grating_steps},
              {"counts", p.counts},
              {"calc_ms", p.calc_ms},
              {"t_s", p.t_s}};
}

ScanPoint point_from_json(const Json& j) {
  ScanPoint p;
  p.index = j.at("index").get<std::size_t>();
  p.e_set_ev = j.at("e_set_ev").get<double>();
  p.e_readback_ev = j.at("e_readback_ev").get<double>();
  p.mirror_steps = j.at("mirror_steps").get<std::int64_t>();
  p.grating_steps = j.at("grating_steps").get<std::int64_t>();
  p.counts = j.at("counts").get<double>();
  p.calc_ms = j.at("calc_ms").get<double>();
  p.t_s = j.at("t_s").get<double>();
  return p;
}

Json to_json(const ScanStatus& s) {
  Json j{{"scan_id", s.scan_id}, {"state", to_string(s.state)}, {"index", s.index}, {"total", s.total}};
  if (s.state == ScanState::Failed) j["code"] = s.code;
  return j;
}

Json to_json(const NormalizedPlan& plan) {
  Json j{{"e_start", plan.e_start}, {"e_end", plan.e_end},       {"step", plan.step},
         {"dwell_s", plan.dwell_s}, {"settle_s", plan.settle_s}, {"mode", to_string(plan.mode)},
         {"n_points", plan.n_points}};
  if (plan.output) j["output"] = *plan.output;
  return j;
}

std::string to_csv(std::span<const ScanPoint> points) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& p : points) {
    append_number(out, static_cast<std::int64_t>(p.index));
    out += ',';
    append_number(out, p.e_set_ev);
    out += ',';
    append_number(out, p.e_readback_ev);
    out += ',';
    append_number(out, p.mirror_steps);
    out += ',';
    append_number(out, p.grating_steps);
    out += ',';
    append_number(out, p.counts);
    out += ',';
    append_number(out, p.calc_ms);
    out += ',';
    append_number(out, p.t_s);
    out += '\n';
  }
  return out;
}

std::vector<ScanPoint> parse_csv(std::string_view text) {
  std::vector<ScanPoint> points;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line_no == 1) {
      if (line != kCsvHeader) throw Error(ErrorCode::Parse, "csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;

    std::vector<std::string_view> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 8) throw Error(ErrorCode::Parse, "csv line " + std::to_string(line_no) + ": expected 8 fields");
    ScanPoint p;
    p.index = parse_field<std::size_t>(f[0], line_no);
    p.e_set_ev = parse_field<double>(f[1], line_no);
    p.e_readback_ev = parse_field<double>(f[2], line_no);
    p.mirror_steps = parse_field<std::int64_t>(f[3], line_no);
    p.grating_steps = parse_field<std::int64_t>(f[4], line_no);
    p.counts = parse_field<double>(f[5], line_no);
    p.calc_ms = parse_field<double>(f[6], line_no);
    p.t_s = parse_field<double>(f[7], line_no);
    points.push_back(p);
  }
  return points;
}

void persist(std::span<const ScanPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  const std::string csv = to_csv(points);
  out.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  out.close();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

// --- ScanEngine --------------------------------------------------------------

void ScanEngine::start(NormalizedPlan plan, ScanHardware& hw) {
  if (running()) throw Error(ErrorCode::Busy, "a scan is already running");
  status_ = ScanStatus{ScanState::Running, status_.scan_id + 1, 0, plan.n_points, {}};
  plan_ = std::move(plan);
  points_.clear();
  points_.reserve(plan_->n_points);
  phase_ = Phase::Position;
  abort_requested_ = false;
  deadline_ = std::numeric_limits<double>::infinity();
  step(hw);
}

void ScanEngine::request_abort() {
  if (!running()) throw Error(ErrorCode::NoScan, "no scan is running");
  abort_requested_ = true;
}

void ScanEngine::finish(ScanState state, std::string code) {
  status_.state = state;
  status_.code = std::move(code);
  if (state == ScanState::Done) status_.index = status_.total;
  deadline_ = std::numeric_limits<double>::infinity();
  abort_requested_ = false;
}

bool ScanEngine::step(ScanHardware& hw) {
  if (!running()) return false;
  const NormalizedPlan& plan = *plan_;

  for (;;) {
    switch (phase_) {
      case Phase::Position: {
        const std::size_t i = points_.size();
        status_.index = i;
        if (abort_requested_) {
          finish(ScanState::Aborted);
          return true;
        }
        const double e = plan.energy_at(i);
        try {
          targets_ = hw.position_axes(e, plan.mode);
        } catch (const Error& err) {
          finish(ScanState::Failed, failure_code(err));
          return true;
        }
        pending_ = ScanPoint{};
        pending_.index = i;
        pending_.e_set_ev = e;
        pending_.calc_ms = targets_.calc_ms;
        deadline_ = hw.now() + targets_.move_s * 2.0 + 5.0;
        phase_ = Phase::Moving;
        break;
      }
      case Phase::Moving: {
        std::string fault;
        const auto axes = hw.axes_state(fault);
        if (axes == ScanHardware::AxesState::Fault) {
          finish(ScanState::Failed, "unit_fault");
          return true;
        }
        if (axes == ScanHardware::AxesState::Moving) {
          if (hw.now() >= deadline_) {
            finish(ScanState::Failed, "move_timeout");
            return true;
          }
          return false;
        }
        deadline_ = hw.now() + plan.settle_s;
        phase_ = Phase::Settling;
        break;
      }
      case Phase::Settling: {
        if (axes_faulted(hw)) return true;
        if (hw.now() < deadline_) return false;
        try {
          const auto rb = hw.read_back();
          pending_.e_readback_ev = rb.e_readback_ev;
          pending_.mirror_steps = rb.mirror_steps;
          pending_.grating_steps = rb.grating_steps;
          pending_.counts = hw.acquire(rb.e_readback_ev, plan.dwell_s);
        } catch (const Error& err) {
          finish(ScanState::Failed, failure_code(err));
          return true;
        }
        pending_.t_s = hw.now();
        deadline_ = hw.now() + plan.dwell_s;
        phase_ = Phase::Dwelling;
        break;
      }
      case Phase::Dwelling: {
        if (axes_faulted(hw)) return true;
        if (hw.now() < deadline_) return false;
        points_.push_back(pending_);
        if (points_.size() == plan.n_points) {
          finish(ScanState::Done);
          return true;
        }
        phase_ = Phase::Position;
        break;
      }
    }
  }
}

bool ScanEngine::axes_faulted(ScanHardware& hw) {
  std::string fault;
  if (hw.axes_state(fault) != ScanHardware::AxesState::Fault) return false;
  finish(ScanState::Failed, "unit_fault");
  return true;
}

double ScanEngine::next_event_time() const noexcept {
  if (!running() || phase_ == Phase::Position) return std::numeric_limits<double>::infinity();
  return deadline_;
}

}  // namespace beamline::scan
