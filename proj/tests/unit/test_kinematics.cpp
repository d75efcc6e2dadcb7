#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "../support/oracle.hpp"
#include "beamline/kinematics.hpp"

using namespace beamline::kinematics;
namespace frozen = oracle::frozen;

namespace {

constexpr double kPi = 3.14159265358979323846;
double rad(double d) { return d * kPi / 180.0; }

Failure failure_of(auto&& fn) {
  try {
    fn();
  } catch (const KinematicsError& e) {
    return e.failure();
  }
  FAIL("expected a KinematicsError");
  return Failure::InvalidConfig;
}

std::vector<Sample> cubic_samples(const std::array<double, 4>& a, double lo, double hi, int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const double e = lo + (hi - lo) * i / (n - 1);
    const double u = (2 * e - lo - hi) / (hi - lo);
    out.push_back({e, a[0] + a[1] * u + a[2] * u * u + a[3] * u * u * u});
  }
  return out;
}

}  // namespace

TEST_SUITE("kinematics") {

TEST_CASE("wavelength follows hc / E") {
  const MonoConfig cfg;
  CHECK(wavelength_nm(1239.8420, cfg) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(wavelength_nm(123.98420, cfg) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(failure_of([&] { wavelength_nm(0.0, cfg); }) == Failure::NonPositiveEnergy);
  CHECK(failure_of([&] { wavelength_nm(-3.0, cfg); }) == Failure::NonPositiveEnergy);
}

TEST_CASE("closed form reproduces the frozen reference angles") {
  const MonoConfig cfg;  // N 1200, k 1, c 2.25
  const auto s100 = solve_diffraction(cfg, 100.0);
  CHECK(std::abs(s100.alpha_deg - frozen::kAlpha100) < 1e-9);
  CHECK(std::abs(s100.beta_deg - frozen::kBeta100) < 1e-9);
  CHECK(std::abs(s100.mirror_grazing_deg - frozen::kMirror100) < 1e-9);
  CHECK(std::abs(s100.grating_exit_grazing_deg - frozen::kGrating100) < 1e-9);

  const auto s400 = solve_diffraction(cfg, 400.0);
  CHECK(std::abs(s400.alpha_deg - frozen::kAlpha400) < 1e-9);
  CHECK(std::abs(s400.beta_deg - frozen::kBeta400) < 1e-9);
  CHECK(std::abs(s400.mirror_grazing_deg - frozen::kMirror400) < 1e-9);
  CHECK(std::abs(s400.grating_exit_grazing_deg - frozen::kGrating400) < 1e-9);

  CHECK(std::abs(solve_diffraction(cfg, 50.0).mirror_grazing_deg - frozen::kMirror50) < 1e-9);
  CHECK(std::abs(solve_diffraction(cfg, 1000.0).grating_exit_grazing_deg - frozen::kGrating1000) < 1e-9);

  MonoConfig c2 = cfg;
  c2.fixed_focus_ratio = 2.0;
  const auto s = solve_diffraction(c2, 400.0);
  CHECK(std::abs(s.alpha_deg - frozen::kAlpha400c2) < 1e-9);
  CHECK(std::abs(s.beta_deg - frozen::kBeta400c2) < 1e-9);
  CHECK(std::abs(s.mirror_grazing_deg - frozen::kMirror400c2) < 1e-9);
}

TEST_CASE("runtime oracle agrees with the frozen values") {
  const auto a = oracle::bisect(1200, 1, 2.25, 1239.8420, 400);
  CHECK(std::abs(static_cast<double>(a.beta_deg) - frozen::kBeta400) < 1e-10);
  CHECK(std::abs(static_cast<double>(a.alpha_deg) - frozen::kAlpha400) < 1e-10);
  const auto b = oracle::bisect(1200, 1, 2.0, 1239.8420, 400);
  CHECK(std::abs(static_cast<double>(b.beta_deg) - frozen::kBeta400c2) < 1e-10);
}

TEST_CASE("solver rejects bad configs and energies") {
  MonoConfig cfg;
  cfg.fixed_focus_ratio = 1.0;
  CHECK(failure_of([&] { solve_diffraction(cfg, 400.0); }) == Failure::SingularConfig);
  cfg.fixed_focus_ratio = 1.0 + 5e-7;
  CHECK(failure_of([&] { solve_diffraction(cfg, 400.0); }) == Failure::SingularConfig);
  cfg.fixed_focus_ratio = 2.25;
  CHECK(failure_of([&] { solve_diffraction(cfg, 49.0); }) == Failure::OutOfRange);
  CHECK(failure_of([&] { solve_diffraction(cfg, 1000.5); }) == Failure::OutOfRange);

  cfg.order = 0;
  CHECK(failure_of([&] { solve_diffraction(cfg, 400.0); }) == Failure::InvalidConfig);
  cfg.order = 1;
  cfg.line_density = -1;
  CHECK(failure_of([&] { solve_diffraction(cfg, 400.0); }) == Failure::InvalidConfig);

  // At 1 eV the wavelength is long enough that the inside-order solution
  // would need a positive beta.
  MonoConfig low;
  low.energy_min = 0.5;
  CHECK(failure_of([&] { solve_diffraction(low, 1.0); }) == Failure::Unsolvable);
}

TEST_CASE("solution invariants hold at random energies") {
  const MonoConfig cfg;
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> energy(cfg.energy_min, cfg.energy_max);
  for (int i = 0; i < 1000; ++i) {
    const double e = energy(rng);
    const auto s = solve_diffraction(cfg, e);
    const double s_mm = cfg.line_density * cfg.order * (cfg.hc / e) * 1e-6;
    CHECK(std::abs(s_mm - (std::sin(rad(s.alpha_deg)) + std::sin(rad(s.beta_deg)))) <= 1e-12);
    CHECK(std::abs(std::cos(rad(s.beta_deg)) / std::cos(rad(s.alpha_deg)) - cfg.fixed_focus_ratio) <= 1e-9);
    CHECK(s.mirror_grazing_deg == 90.0 - (s.alpha_deg - s.beta_deg) / 2.0);
    CHECK(s.grating_exit_grazing_deg == 90.0 + s.beta_deg);
    CHECK(s.alpha_deg > 0.0);
    CHECK(s.alpha_deg < 90.0);
    CHECK(s.beta_deg > -90.0);
    CHECK(s.beta_deg < 0.0);
    CHECK(s.mirror_grazing_deg > 0.0);
    CHECK(s.mirror_grazing_deg < 90.0);
    CHECK(s.grating_exit_grazing_deg > 0.0);
    CHECK(s.grating_exit_grazing_deg < 90.0);

    const auto ref = oracle::bisect(cfg.line_density, cfg.order, cfg.fixed_focus_ratio, cfg.hc, e);
    CHECK(std::abs(s.alpha_deg - static_cast<double>(ref.alpha_deg)) <= 1e-9);
    CHECK(std::abs(s.beta_deg - static_cast<double>(ref.beta_deg)) <= 1e-9);

    CHECK(std::abs(energy_from_beta(cfg, s.beta_deg) - e) / e <= 1e-9);
  }
}

TEST_CASE("both axis angles fall as energy rises") {
  // Grazing angles shrink at higher energy for k > 0, c > 1: beta moves toward
  // -90 degrees, so 90 + beta decreases together with the mirror angle.
  for (double c : {1.5, 2.25, 5.0}) {
    MonoConfig cfg;
    cfg.fixed_focus_ratio = c;
    double prev_mirror = INFINITY;
    double prev_grating = INFINITY;
    for (int i = 0; i < 1000; ++i) {
      const double e = cfg.energy_min + (cfg.energy_max - cfg.energy_min) * i / 999.0;
      const auto s = solve_diffraction(cfg, e);
      CHECK(s.mirror_grazing_deg < prev_mirror);
      CHECK(s.grating_exit_grazing_deg < prev_grating);
      prev_mirror = s.mirror_grazing_deg;
      prev_grating = s.grating_exit_grazing_deg;
    }
  }
}

TEST_CASE("energy_from_beta edge cases") {
  const MonoConfig cfg;
  CHECK(energy_from_beta(cfg, -5.0) == doctest::Approx(frozen::kEnergyBetaMinus5).epsilon(1e-12));
  CHECK(failure_of([&] { energy_from_beta(cfg, 0.0); }) == Failure::OutOfRange);
  CHECK(failure_of([&] { energy_from_beta(cfg, -90.0); }) == Failure::OutOfRange);
  CHECK(failure_of([&] { energy_from_beta(cfg, 3.0); }) == Failure::OutOfRange);

  MonoConfig narrow = cfg;
  narrow.fixed_focus_ratio = 0.5;  // cos(beta) / c > 1 for most beta
  CHECK(failure_of([&] { energy_from_beta(narrow, -10.0); }) == Failure::Unsolvable);

  MonoConfig outside = cfg;
  outside.order = -1;
  CHECK(failure_of([&] { energy_from_beta(outside, -80.0); }) == Failure::NonPositiveWavelength);
}

TEST_CASE("fit_cubic recovers constants and exact cubics") {
  std::vector<Sample> flat;
  for (int i = 0; i < 7; ++i) flat.push_back({100.0 + 10 * i, 5.0});
  const auto f = fit_cubic(flat);
  CHECK(std::abs(f.coefficients[0] - 5.0) < 1e-9);
  for (int j = 1; j < 4; ++j) CHECK(std::abs(f.coefficients[j]) < 1e-9);
  CHECK(f.sample_count == 7);
  CHECK(f.max_residual_deg >= f.rms_residual_deg);

  const auto g = fit_cubic(cubic_samples({1, 2, -1, 0.5}, 200, 600, 9));
  CHECK(std::abs(g.coefficients[0] - 1.0) < 1e-6);
  CHECK(std::abs(g.coefficients[1] - 2.0) < 1e-6);
  CHECK(std::abs(g.coefficients[2] + 1.0) < 1e-6);
  CHECK(std::abs(g.coefficients[3] - 0.5) < 1e-6);
  CHECK(g.e_lo == 200.0);
  CHECK(g.e_hi == 600.0);

  const std::vector<Sample> three{{1, 1}, {2, 2}, {3, 3}};
  CHECK(failure_of([&] { fit_cubic(three); }) == Failure::TooFewSamples);
  const std::vector<Sample> repeated{{1, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 1}};
  CHECK(failure_of([&] { fit_cubic(repeated); }) == Failure::DegenerateAbscissae);
}

TEST_CASE("fit_cubic recovers random cubics") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-50.0, 50.0);
  std::uniform_real_distribution<double> lo_d(10.0, 500.0);
  std::uniform_real_distribution<double> span_d(1.0, 1000.0);
  std::uniform_int_distribution<int> count(4, 60);
  for (int trial = 0; trial < 500; ++trial) {
    const std::array<double, 4> a{coef(rng), coef(rng), coef(rng), coef(rng)};
    const double lo = lo_d(rng);
    const auto f = fit_cubic(cubic_samples(a, lo, lo + span_d(rng), count(rng)));
    const double scale = std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2]), std::abs(a[3])});
    for (int j = 0; j < 4; ++j) CHECK(std::abs(f.coefficients[j] - a[j]) <= 1e-6 * scale);
  }
}

TEST_CASE("fit table over 250-450 eV stays within a hundredth of a degree") {
  const MonoConfig cfg;
  const auto fits = build_fit_table(cfg, 250.0, 450.0, 21);
  CHECK(fits.mirror.axis == Axis::Mirror);
  CHECK(fits.grating.axis == Axis::Grating);
  CHECK(fits.mirror.sample_count == 21);
  CHECK(fits.mirror.max_residual_deg < 0.01);
  CHECK(fits.grating.max_residual_deg < 0.01);

  double max_dev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double e = 250.0 + 200.0 * i / 999.0;
    const auto s = solve_diffraction(cfg, e);
    max_dev = std::max(max_dev, std::abs(eval_fit(fits.mirror, e) - s.mirror_grazing_deg));
    max_dev = std::max(max_dev, std::abs(eval_fit(fits.grating, e) - s.grating_exit_grazing_deg));
  }
  CHECK(max_dev < 0.01);

  // Endpoints pinned against the frozen reference.
  CHECK(std::abs(eval_fit(fits.mirror, 250.0) - frozen::kMirror250) < 0.01);
  CHECK(std::abs(eval_fit(fits.grating, 450.0) - frozen::kGrating450) < 0.01);

  CHECK_NOTHROW(build_fit_table(cfg, 250.0, 450.0, 4));
  CHECK(failure_of([&] { build_fit_table(cfg, 300.0, 300.0, 21); }) == Failure::OutOfRange);
  CHECK(failure_of([&] { build_fit_table(cfg, 250.0, 450.0, 3); }) == Failure::TooFewSamples);
  CHECK(failure_of([&] { build_fit_table(cfg, 20.0, 450.0, 21); }) == Failure::OutOfRange);
}

TEST_CASE("eval_fit algebra and domain") {
  std::vector<Sample> flat;
  for (int i = 0; i < 5; ++i) flat.push_back({100.0 + i, 5.0});
  const auto f = fit_cubic(flat);
  CHECK(eval_fit(f, 102.5) == doctest::Approx(5.0).epsilon(1e-12));

  const auto g = fit_cubic(cubic_samples({1, 2, -1, 0.5}, 200, 600, 9));
  const auto& a = g.coefficients;
  CHECK(eval_fit(g, 200.0) == doctest::Approx(a[0] - a[1] + a[2] - a[3]).epsilon(1e-12));
  CHECK(eval_fit(g, 600.0) == doctest::Approx(a[0] + a[1] + a[2] + a[3]).epsilon(1e-12));
  CHECK(failure_of([&] { eval_fit(g, 199.999); }) == Failure::OutOfDomain);
  CHECK(failure_of([&] { eval_fit(g, 600.001); }) == Failure::OutOfDomain);
}

TEST_CASE("fit error report tracks fidelity and parameter drift") {
  const MonoConfig cfg;
  const auto fits = build_fit_table(cfg, 250.0, 450.0, 21);
  const auto report = fit_error_report(cfg, fits, 1000);
  CHECK(report.probes == 1000);
  CHECK(report.mirror.max_dev_deg == doctest::Approx(fits.mirror.max_residual_deg).epsilon(0.10));
  CHECK(report.grating.max_dev_deg == doctest::Approx(fits.grating.max_residual_deg).epsilon(0.10));
  CHECK(report.mirror.max_dev_deg >= report.mirror.rms_dev_deg);

  const auto one = fit_error_report(cfg, fits, 1);
  const auto mid = solve_diffraction(cfg, 350.0);
  CHECK(one.probes == 1);
  CHECK(one.mirror.max_dev_deg == doctest::Approx(std::abs(eval_fit(fits.mirror, 350.0) - mid.mirror_grazing_deg)));
  CHECK(one.mirror.max_dev_deg == one.mirror.rms_dev_deg);

  MonoConfig drifted = cfg;
  drifted.fixed_focus_ratio *= 1.01;
  const auto after = fit_error_report(drifted, fits, 1000);
  CHECK(after.mirror.max_dev_deg > report.mirror.max_dev_deg);
  CHECK(after.grating.max_dev_deg > report.grating.max_dev_deg);

  CHECK(failure_of([&] { fit_error_report(cfg, fits, 0); }) == Failure::TooFewSamples);
}

TEST_CASE("real-time solve is fast") {
  const MonoConfig cfg;
  std::vector<double> ms;
  volatile double sink = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    sink = sink + solve_diffraction(cfg, 50.0 + i * 0.095).beta_deg;
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
  CHECK(ms[ms.size() / 2] < 10.0);
}

}
