#include "beamline/kinematics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace beamline::kinematics {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kRad = std::numbers::pi / 180.0;

std::string fmt_energy(double e) { return std::to_string(e) + " eV"; }

double normalized(double energy, double lo, double hi) {
  return (2.0 * energy - lo - hi) / (hi - lo);
}

double horner(const std::array<double, 4>& a, double u) {
  return ((a[3] * u + a[2]) * u + a[1]) * u + a[0];
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  std::vector<double> grid(n);
  if (n == 1) {
    grid[0] = 0.5 * (lo + hi);
    return grid;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = lo + span * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  grid.back() = hi;
  return grid;
}

}  // namespace

std::string_view to_string(Failure failure) noexcept {
  switch (failure) {
    case Failure::NonPositiveEnergy: return "NonPositiveEnergy";
    case Failure::OutOfRange: return "OutOfRange";
    case Failure::Unsolvable: return "Unsolvable";
    case Failure::SingularConfig: return "SingularConfig";
    case Failure::InvalidConfig: return "InvalidConfig";
    case Failure::NonPositiveWavelength: return "NonPositiveWavelength";
    case Failure::TooFewSamples: return "TooFewSamples";
    case Failure::DegenerateAbscissae: return "DegenerateAbscissae";
    case Failure::OutOfDomain: return "OutOfDomain";
  }
  return "Unknown";
}

std::string_view to_string(Axis axis) noexcept {
  return axis == Axis::Mirror ? "mirror" : "grating";
}

double axis_angle(const OpticsSolution& solution, Axis axis) noexcept {
  return axis == Axis::Mirror ? solution.mirror_grazing_deg : solution.grating_exit_grazing_deg;
}

void MonoConfig::validate() const {
  if (!(line_density > 0.0) || !std::isfinite(line_density)) {
    throw KinematicsError(Failure::InvalidConfig, "line_density must be > 0");
  }
  if (order == 0) {
    throw KinematicsError(Failure::InvalidConfig, "order must be non-zero");
  }
  if (!(fixed_focus_ratio > 0.0) || !std::isfinite(fixed_focus_ratio)) {
    throw KinematicsError(Failure::InvalidConfig, "fixed_focus_ratio must be > 0");
  }
  if (std::abs(fixed_focus_ratio - 1.0) < kSingularThreshold) {
    throw KinematicsError(Failure::SingularConfig,
                          "fixed_focus_ratio too close to 1 (closed form divides by c^2 - 1)");
  }
  if (!(energy_min > 0.0) || !(energy_min < energy_max) || !std::isfinite(energy_max)) {
    throw KinematicsError(Failure::InvalidConfig, "energy range must satisfy 0 < energy_min < energy_max");
  }
  if (!(hc > 0.0) || !std::isfinite(hc)) {
    throw KinematicsError(Failure::InvalidConfig, "hc must be > 0");
  }
}

double wavelength_nm(double energy_ev, const MonoConfig& cfg) {
  if (!(energy_ev > 0.0)) {
    throw KinematicsError(Failure::NonPositiveEnergy, "photon energy must be > 0, got " + fmt_energy(energy_ev));
  }
  return cfg.hc / energy_ev;
}

OpticsSolution solve_diffraction(const MonoConfig& cfg, double energy_ev) {
  cfg.validate();
  const double lambda_mm = wavelength_nm(energy_ev, cfg) * 1e-6;
  if (energy_ev < cfg.energy_min || energy_ev > cfg.energy_max) {
    throw KinematicsError(Failure::OutOfRange, fmt_energy(energy_ev) + " outside configured range");
  }

  const double s = cfg.line_density * cfg.order * lambda_mm;
  const double c2 = cfg.fixed_focus_ratio * cfg.fixed_focus_ratio;
  const double d = c2 - 1.0;
  const double sin_beta = (c2 * s - std::sqrt(c2 * s * s + d * d)) / d;
  const double sin_alpha = s - sin_beta;
  if (!(std::abs(sin_beta) < 1.0) || !(std::abs(sin_alpha) < 1.0)) {
    throw KinematicsError(Failure::Unsolvable, "no real solution at " + fmt_energy(energy_ev));
  }

  const double alpha = std::asin(sin_alpha);
  const double beta = std::asin(sin_beta);
  // The quadratic root only honours the fixed-focus constraint when the sign
  // convention (alpha > 0 > beta) holds.
  if (!(alpha > 0.0) || !(beta < 0.0) ||
      std::abs(std::cos(beta) / std::cos(alpha) - cfg.fixed_focus_ratio) > 1e-6 * cfg.fixed_focus_ratio) {
    throw KinematicsError(Failure::Unsolvable, "no inside-order solution at " + fmt_energy(energy_ev));
  }

  OpticsSolution out;
  out.energy = energy_ev;
  out.alpha_deg = alpha * kDeg;
  out.beta_deg = beta * kDeg;
  out.mirror_grazing_deg = 90.0 - (out.alpha_deg - out.beta_deg) / 2.0;
  out.grating_exit_grazing_deg = 90.0 + out.beta_deg;
  return out;
}

double energy_from_beta(const MonoConfig& cfg, double beta_deg) {
  cfg.validate();
  if (!(beta_deg > -90.0 && beta_deg < 0.0)) {
    throw KinematicsError(Failure::OutOfRange, "beta must lie in (-90, 0) degrees");
  }
  const double beta = beta_deg * kRad;
  const double cos_alpha = std::cos(beta) / cfg.fixed_focus_ratio;
  if (cos_alpha > 1.0) {
    throw KinematicsError(Failure::Unsolvable, "cos(beta) / c exceeds 1");
  }
  const double alpha = std::acos(cos_alpha);
  const double lambda_mm = (std::sin(alpha) + std::sin(beta)) / (cfg.line_density * cfg.order);
  if (!(lambda_mm > 0.0)) {
    throw KinematicsError(Failure::NonPositiveWavelength, "diffraction angle maps to a non-positive wavelength");
  }
  return cfg.hc / (lambda_mm * 1e6);
}

CubicFit fit_cubic(std::span<const Sample> samples, Axis axis) {
  if (samples.size() < 4) {
    throw KinematicsError(Failure::TooFewSamples, "cubic fit needs at least 4 samples");
  }
  std::vector<double> energies;
  energies.reserve(samples.size());
  for (const auto& s : samples) energies.push_back(s.energy);
  std::sort(energies.begin(), energies.end());
  const auto distinct = std::unique(energies.begin(), energies.end()) - energies.begin();
  if (distinct < 4) {
    throw KinematicsError(Failure::DegenerateAbscissae, "cubic fit needs at least 4 distinct energies");
  }

  const double lo = energies.front();
  const double hi = energies[static_cast<std::size_t>(distinct) - 1];
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = normalized(samples[static_cast<std::size_t>(i)].energy, lo, hi);
    design(i, 0) = 1.0;
    design(i, 1) = u;
    design(i, 2) = u * u;
    design(i, 3) = u * u * u;
    rhs(i) = samples[static_cast<std::size_t>(i)].value;
  }
  const Eigen::Vector4d coeffs = design.colPivHouseholderQr().solve(rhs);

  CubicFit fit;
  fit.axis = axis;
  fit.coefficients = {coeffs(0), coeffs(1), coeffs(2), coeffs(3)};
  fit.e_lo = lo;
  fit.e_hi = hi;
  fit.sample_count = samples.size();

  double sum_sq = 0.0;
  for (const auto& s : samples) {
    const double r = std::abs(horner(fit.coefficients, normalized(s.energy, lo, hi)) - s.value);
    sum_sq += r * r;
    fit.max_residual_deg = std::max(fit.max_residual_deg, r);
  }
  fit.rms_residual_deg = std::sqrt(sum_sq / static_cast<double>(samples.size()));
  return fit;
}

FitPair build_fit_table(const MonoConfig& cfg, double e_lo, double e_hi, std::size_t n) {
  if (!(e_lo < e_hi)) {
    throw KinematicsError(Failure::OutOfRange, "fit domain must satisfy e_lo < e_hi");
  }
  if (e_lo < cfg.energy_min || e_hi > cfg.energy_max) {
    throw KinematicsError(Failure::OutOfRange, "fit domain outside configured energy range");
  }
  if (n < 4) {
    throw KinematicsError(Failure::TooFewSamples, "fit table needs n >= 4");
  }

  std::vector<Sample> mirror;
  std::vector<Sample> grating;
  mirror.reserve(n);
  grating.reserve(n);
  for (double e : uniform_grid(e_lo, e_hi, n)) {
    const auto sol = solve_diffraction(cfg, e);
    mirror.push_back({e, sol.mirror_grazing_deg});
    grating.push_back({e, sol.grating_exit_grazing_deg});
  }
  return FitPair{fit_cubic(mirror, Axis::Mirror), fit_cubic(grating, Axis::Grating)};
}

double eval_fit(const CubicFit& fit, double energy_ev) {
  if (!(energy_ev >= fit.e_lo && energy_ev <= fit.e_hi)) {
    throw KinematicsError(Failure::OutOfDomain, fmt_energy(energy_ev) + " outside fit domain");
  }
  return horner(fit.coefficients, normalized(energy_ev, fit.e_lo, fit.e_hi));
}

FitErrorReport fit_error_report(const MonoConfig& cfg, const FitPair& fits, std::size_t n_probe) {
  if (n_probe == 0) {
    throw KinematicsError(Failure::TooFewSamples, "fit report needs at least one probe");
  }
  FitErrorReport report;
  report.probes = n_probe;
  for (Axis axis : {Axis::Mirror, Axis::Grating}) {
    const CubicFit& fit = fits.for_axis(axis);
    AxisDeviation& dev = axis == Axis::Mirror ? report.mirror : report.grating;
    double sum_sq = 0.0;
    for (double e : uniform_grid(fit.e_lo, fit.e_hi, n_probe)) {
      const double d = std::abs(eval_fit(fit, e) - axis_angle(solve_diffraction(cfg, e), axis));
      sum_sq += d * d;
      dev.max_dev_deg = std::max(dev.max_dev_deg, d);
    }
    dev.rms_dev_deg = std::sqrt(sum_sq / static_cast<double>(n_probe));
  }
  return report;
}

}  // namespace beamline::kinematics
