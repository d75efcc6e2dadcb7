#pragma once

// Variable-included-angle grating monochromator kinematics.
//
// Model: grating equation N*k*lambda = sin(alpha) + sin(beta) with alpha > 0,
// beta < 0 (inside order), fixed-focus constraint c = cos(beta) / cos(alpha),
// and a plane pre-mirror with fixed horizontal exit:
//   mirror grazing          = 90 - (alpha - beta) / 2
//   grating exit grazing    = 90 + beta
// Angles are degrees at every public boundary.

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beamline::kinematics {

inline constexpr double kDefaultHc = 1239.8420;  // eV*nm
inline constexpr double kSingularThreshold = 1e-6;

enum class Failure {
  NonPositiveEnergy,
  OutOfRange,
  Unsolvable,
  SingularConfig,
  InvalidConfig,
  NonPositiveWavelength,
  TooFewSamples,
  DegenerateAbscissae,
  OutOfDomain,
};

std::string_view to_string(Failure failure) noexcept;

class KinematicsError : public std::runtime_error {
 public:
  KinematicsError(Failure failure, const std::string& message)
      : std::runtime_error(message), failure_(failure) {}

  Failure failure() const noexcept { return failure_; }

 private:
  Failure failure_;
};

struct MonoConfig {
  double line_density = 1200.0;  // lines per mm
  int order = 1;
  double fixed_focus_ratio = 2.25;
  double energy_min = 50.0;  // eV
  double energy_max = 1000.0;
  double hc = kDefaultHc;

  /// Throws KinematicsError (SingularConfig for |c - 1| < 1e-6, InvalidConfig
  /// for anything else).
  void validate() const;
};

struct OpticsSolution {
  double energy = 0.0;
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double mirror_grazing_deg = 0.0;
  double grating_exit_grazing_deg = 0.0;
};

enum class Axis { Mirror, Grating };

std::string_view to_string(Axis axis) noexcept;

/// Angle an axis must be driven to for a given solution.
double axis_angle(const OpticsSolution& solution, Axis axis) noexcept;

/// Cubic in the normalized abscissa u = (2E - lo - hi) / (hi - lo).
struct CubicFit {
  Axis axis = Axis::Mirror;
  std::array<double, 4> coefficients{};
  double e_lo = 0.0;
  double e_hi = 0.0;
  double rms_residual_deg = 0.0;
  double max_residual_deg = 0.0;
  std::size_t sample_count = 0;
};

struct Sample {
  double energy;
  double value;
};

struct FitPair {
  CubicFit mirror;
  CubicFit grating;

  const CubicFit& for_axis(Axis axis) const noexcept {
    return axis == Axis::Mirror ? mirror : grating;
  }
};

struct AxisDeviation {
  double max_dev_deg = 0.0;
  double rms_dev_deg = 0.0;
};

struct FitErrorReport {
  AxisDeviation mirror;
  AxisDeviation grating;
  std::size_t probes = 0;
};

double wavelength_nm(double energy_ev, const MonoConfig& cfg);

/// Closed-form real-time solve for one photon energy.
OpticsSolution solve_diffraction(const MonoConfig& cfg, double energy_ev);

/// Exact inverse of solve_diffraction on the diffraction angle.
double energy_from_beta(const MonoConfig& cfg, double beta_deg);

/// Least-squares cubic over the samples' own energy span.
CubicFit fit_cubic(std::span<const Sample> samples, Axis axis = Axis::Mirror);

/// Samples solve_diffraction at n equally spaced energies in [e_lo, e_hi]
/// and fits both axes.
FitPair build_fit_table(const MonoConfig& cfg, double e_lo, double e_hi, std::size_t n);

/// Throws OutOfDomain outside [fit.e_lo, fit.e_hi]; fits never extrapolate.
double eval_fit(const CubicFit& fit, double energy_ev);

/// Deviation of the fits from the real-time solve at n_probe uniform energies
/// over the fit domain (midpoint only when n_probe == 1).
FitErrorReport fit_error_report(const MonoConfig& cfg, const FitPair& fits, std::size_t n_probe);

}  // namespace beamline::kinematics
