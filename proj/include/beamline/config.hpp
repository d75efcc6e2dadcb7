#pragma once

// Beamline configuration file: JSON, with // and /* */ comments permitted.
// config/beamline.example.json documents every field.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "beamline/hardware.hpp"
#include "beamline/kinematics.hpp"

namespace beamline {

/// Affine angle <-> step coupling of one optical axis:
///   steps = round((angle_deg - offset_deg) * steps_per_degree)
struct AxisMapping {
  std::string motor;
  std::string encoder;
  double steps_per_degree = 3600.0;
  double offset_deg = 0.0;
};

struct ClockConfig {
  sim::ClockMode mode = sim::ClockMode::Realtime;
  double factor = 1.0;
  double tick_s = 0.010;
};

struct ServerConfig {
  std::string bind = "127.0.0.1";
  std::uint16_t tcp_port = 5025;
  std::uint16_t http_port = 8080;
};

struct BeamlineConfig {
  std::string name = "beamline-sim";
  kinematics::MonoConfig mono;
  double resolving_power = 10000.0;
  double default_settle_s = 0.1;
  AxisMapping mirror;
  AxisMapping grating;
  std::vector<sim::MotorParams> motors;
  std::vector<sim::EncoderParams> encoders;
  sim::DetectorParams detector;
  ClockConfig clock;
  ServerConfig server;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);

  /// One entry per offending field, e.g. "axes.mirror.motor: no motor named 'x'".
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Throws ConfigError listing every violation found.
void validate(const BeamlineConfig& cfg);

BeamlineConfig parse_config(std::string_view json_text);
BeamlineConfig load_config(const std::filesystem::path& path);

/// The stock two-axis roster (mirror_pitch, grating_pitch, their encoders and
/// one detector) used when no file is given.
BeamlineConfig default_config();

}  // namespace beamline
