#include "beamline/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace beamline {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& lines) {
  std::string out = "invalid beamline config";
  for (const auto& l : lines) out += "\n  " + l;
  return out;
}

/// Reads optional typed fields, recording a diagnostic instead of throwing so
/// that one pass reports every bad field.
class FieldReader {
 public:
  explicit FieldReader(std::vector<std::string>& diags) : diags_(diags) {}

  template <typename T>
  void read(const json& obj, const char* key, T& out, const std::string& path) {
    if (!obj.is_object()) return;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw std::invalid_argument("expected string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected number");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      diags_.push_back(path + key + ": " + e.what());
    }
  }

  void require(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) diags_.push_back(path + key + ": required");
  }

 private:
  std::vector<std::string>& diags_;
};

sim::MotorParams parse_motor(const json& j, const std::string& path, FieldReader& r) {
  sim::MotorParams m;
  r.require(j, "name", path);
  r.read(j, "name", m.name, path);
  r.read(j, "position", m.position, path);
  r.read(j, "velocity_sps", m.velocity_sps, path);
  r.read(j, "soft_min", m.soft_min, path);
  r.read(j, "soft_max", m.soft_max, path);
  return m;
}

sim::EncoderParams parse_encoder(const json& j, const std::string& path, FieldReader& r) {
  sim::EncoderParams e;
  r.require(j, "name", path);
  r.require(j, "motor", path);
  r.read(j, "name", e.name, path);
  r.read(j, "motor", e.motor, path);
  r.read(j, "counts_per_step", e.counts_per_step, path);
  r.read(j, "offset_counts", e.offset_counts, path);
  return e;
}

sim::DetectorParams parse_detector(const json& j, const std::string& path, FieldReader& r,
                                   std::vector<std::string>& diags) {
  sim::DetectorParams d;
  r.read(j, "name", d.name, path);
  r.read(j, "background_cps", d.background_cps, path);
  if (j.contains("peaks")) {
    if (!j["peaks"].is_array()) {
      diags.push_back(path + "peaks: expected array");
    } else {
      for (std::size_t i = 0; i < j["peaks"].size(); ++i) {
        const auto& pj = j["peaks"][i];
        const std::string pp = path + "peaks[" + std::to_string(i) + "].";
        sim::Peak p;
        r.read(pj, "center_ev", p.center_ev, pp);
        r.read(pj, "amplitude_cps", p.amplitude_cps, pp);
        r.read(pj, "sigma_ev", p.sigma_ev, pp);
        d.peaks.push_back(p);
      }
    }
  }
  if (j.contains("noise")) {
    const auto& nj = j["noise"];
    std::string kind = "none";
    r.read(nj, "kind", kind, path + "noise.");
    if (kind == "poisson") {
      d.noise.kind = sim::NoiseKind::Poisson;
    } else if (kind != "none") {
      diags.push_back(path + "noise.kind: expected 'none' or 'poisson'");
    }
    r.read(nj, "seed", d.noise.seed, path + "noise.");
  }
  return d;
}

AxisMapping parse_axis(const json& j, const std::string& path, FieldReader& r) {
  AxisMapping a;
  r.require(j, "motor", path);
  r.require(j, "encoder", path);
  r.read(j, "motor", a.motor, path);
  r.read(j, "encoder", a.encoder, path);
  r.read(j, "steps_per_degree", a.steps_per_degree, path);
  r.read(j, "offset_deg", a.offset_deg, path);
  return a;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::runtime_error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

void validate(const BeamlineConfig& cfg) {
  std::vector<std::string> diags;

  try {
    cfg.mono.validate();
  } catch (const kinematics::KinematicsError& e) {
    diags.push_back(std::string("mono: ") + e.what());
  }
  if (!(cfg.resolving_power > 0.0)) diags.push_back("resolving_power: must be > 0");
  if (!(cfg.default_settle_s >= 0.0)) diags.push_back("default_settle_s: must be >= 0");
  if (!(cfg.clock.tick_s > 0.0)) diags.push_back("clock.tick_ms: must be > 0");
  if (cfg.clock.mode == sim::ClockMode::Scaled && !(cfg.clock.factor > 0.0)) {
    diags.push_back("clock.factor: must be > 0");
  }

  std::set<std::string> names;
  std::set<std::string> motor_names;
  std::set<std::string> encoder_names;
  auto claim = [&](const std::string& name, const std::string& where) {
    if (name.empty()) {
      diags.push_back(where + ".name: must not be empty");
    } else if (!names.insert(name).second) {
      diags.push_back(where + ".name: duplicate unit name '" + name + "'");
    }
  };

  for (std::size_t i = 0; i < cfg.motors.size(); ++i) {
    const auto& m = cfg.motors[i];
    const std::string where = "motors[" + std::to_string(i) + "]";
    claim(m.name, where);
    motor_names.insert(m.name);
    if (!(m.velocity_sps > 0.0)) diags.push_back(where + ".velocity_sps: must be > 0");
    if (m.soft_min > m.soft_max) diags.push_back(where + ".soft_min: exceeds soft_max");
    if (m.position < m.soft_min || m.position > m.soft_max) {
      diags.push_back(where + ".position: home outside soft limits");
    }
  }
  for (std::size_t i = 0; i < cfg.encoders.size(); ++i) {
    const auto& e = cfg.encoders[i];
    const std::string where = "encoders[" + std::to_string(i) + "]";
    claim(e.name, where);
    encoder_names.insert(e.name);
    if (e.counts_per_step == 0.0 || !std::isfinite(e.counts_per_step)) {
      diags.push_back(where + ".counts_per_step: must be non-zero");
    }
    if (!motor_names.count(e.motor)) {
      diags.push_back(where + ".motor: no motor named '" + e.motor + "'");
    }
  }
  claim(cfg.detector.name, "detector");
  if (!(cfg.detector.background_cps >= 0.0)) diags.push_back("detector.background_cps: must be >= 0");
  for (std::size_t i = 0; i < cfg.detector.peaks.size(); ++i) {
    const auto& p = cfg.detector.peaks[i];
    const std::string where = "detector.peaks[" + std::to_string(i) + "]";
    if (!(p.amplitude_cps >= 0.0)) diags.push_back(where + ".amplitude_cps: must be >= 0");
    if (!(p.sigma_ev > 0.0)) diags.push_back(where + ".sigma_ev: must be > 0");
  }

  auto check_axis = [&](const AxisMapping& a, const std::string& where) {
    if (!motor_names.count(a.motor)) diags.push_back(where + ".motor: no motor named '" + a.motor + "'");
    if (!encoder_names.count(a.encoder)) {
      diags.push_back(where + ".encoder: no encoder named '" + a.encoder + "'");
    } else {
      const auto it = std::find_if(cfg.encoders.begin(), cfg.encoders.end(),
                                   [&](const auto& e) { return e.name == a.encoder; });
      if (it->motor != a.motor) diags.push_back(where + ".encoder: not bound to the axis motor");
    }
    if (!(a.steps_per_degree != 0.0) || !std::isfinite(a.steps_per_degree)) {
      diags.push_back(where + ".steps_per_degree: must be non-zero");
    }
  };
  check_axis(cfg.mirror, "axes.mirror");
  check_axis(cfg.grating, "axes.grating");
  if (!cfg.mirror.motor.empty() && cfg.mirror.motor == cfg.grating.motor) {
    diags.push_back("axes: mirror and grating must use different motors");
  }

  if (!diags.empty()) throw ConfigError(std::move(diags));
}

BeamlineConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"root: expected object"});

  std::vector<std::string> diags;
  FieldReader r(diags);
  BeamlineConfig cfg;
  cfg.motors.clear();
  cfg.encoders.clear();

  r.read(root, "name", cfg.name, "");
  r.read(root, "resolving_power", cfg.resolving_power, "");
  r.read(root, "default_settle_s", cfg.default_settle_s, "");

  if (root.contains("server")) {
    const auto& s = root["server"];
    r.read(s, "bind", cfg.server.bind, "server.");
    r.read(s, "tcp_port", cfg.server.tcp_port, "server.");
    r.read(s, "http_port", cfg.server.http_port, "server.");
  }

  if (root.contains("clock")) {
    const auto& c = root["clock"];
    std::string mode = "realtime";
    r.read(c, "mode", mode, "clock.");
    if (mode == "scaled") {
      cfg.clock.mode = sim::ClockMode::Scaled;
    } else if (mode != "realtime") {
      diags.push_back("clock.mode: expected 'realtime' or 'scaled'");
    }
    r.read(c, "factor", cfg.clock.factor, "clock.");
    double tick_ms = cfg.clock.tick_s * 1000.0;
    r.read(c, "tick_ms", tick_ms, "clock.");
    cfg.clock.tick_s = tick_ms / 1000.0;
  }

  r.require(root, "mono", "");
  if (root.contains("mono")) {
    const auto& m = root["mono"];
    r.read(m, "line_density", cfg.mono.line_density, "mono.");
    r.read(m, "order", cfg.mono.order, "mono.");
    r.read(m, "fixed_focus_ratio", cfg.mono.fixed_focus_ratio, "mono.");
    r.read(m, "energy_min", cfg.mono.energy_min, "mono.");
    r.read(m, "energy_max", cfg.mono.energy_max, "mono.");
    r.read(m, "hc", cfg.mono.hc, "mono.");
  }

  r.require(root, "axes", "");
  if (root.contains("axes")) {
    const auto& a = root["axes"];
    r.require(a, "mirror", "axes.");
    r.require(a, "grating", "axes.");
    if (a.is_object()) {
      for (const auto& [key, _] : a.items()) {
        if (key != "mirror" && key != "grating") diags.push_back("axes." + key + ": unknown axis");
      }
    }
    if (a.contains("mirror")) cfg.mirror = parse_axis(a["mirror"], "axes.mirror.", r);
    if (a.contains("grating")) cfg.grating = parse_axis(a["grating"], "axes.grating.", r);
  }

  r.require(root, "motors", "");
  if (root.contains("motors")) {
    if (!root["motors"].is_array()) {
      diags.push_back("motors: expected array");
    } else {
      for (std::size_t i = 0; i < root["motors"].size(); ++i) {
        cfg.motors.push_back(parse_motor(root["motors"][i], "motors[" + std::to_string(i) + "].", r));
      }
    }
  }
  if (root.contains("encoders")) {
    if (!root["encoders"].is_array()) {
      diags.push_back("encoders: expected array");
    } else {
      for (std::size_t i = 0; i < root["encoders"].size(); ++i) {
        cfg.encoders.push_back(parse_encoder(root["encoders"][i], "encoders[" + std::to_string(i) + "].", r));
      }
    }
  }
  r.require(root, "detector", "");
  if (root.contains("detector")) cfg.detector = parse_detector(root["detector"], "detector.", r, diags);

  if (!diags.empty()) throw ConfigError(std::move(diags));
  validate(cfg);
  return cfg;
}

BeamlineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"file: cannot open " + path.string()});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

BeamlineConfig default_config() {
  BeamlineConfig cfg;
  cfg.mono = kinematics::MonoConfig{};
  cfg.mirror = AxisMapping{"mirror_pitch", "mirror_enc", 3600.0, 0.0};
  cfg.grating = AxisMapping{"grating_pitch", "grating_enc", 3600.0, 0.0};
  cfg.motors = {
      sim::MotorParams{"grating_pitch", 0, 20000.0, 0, 72000},
      sim::MotorParams{"mirror_pitch", 0, 20000.0, 0, 60000},
  };
  cfg.encoders = {
      sim::EncoderParams{"grating_enc", "grating_pitch", 4.0, 0},
      sim::EncoderParams{"mirror_enc", "mirror_pitch", 2.0, 0},
  };
  cfg.detector = sim::DetectorParams{"i0", 100.0, {sim::Peak{400.0, 900.0, 2.0}}, {}};
  return cfg;
}

}  // namespace beamline
