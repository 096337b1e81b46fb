#include <cmath>
#include <numbers>

#include "braggkit/constraints.hpp"
#include "braggkit/error.hpp"
#include "doctest.h"

using namespace braggkit;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent evaluation of the scattered fraction: trapezoid rule over
// +-8 tau with the SI constants restated here.
double oracle_loss(double omega, double tau, double intensity) {
  const double hbar = 1.054571817e-34;
  const double eps0 = 8.8541878128e-12;
  const double c = 299792458.0;
  const double wr = 2.0 * kPi * 3.8e3;
  const double gamma = 2.0 * kPi * 6.07e6;
  const double d = 2e-29;
  const double isat = 16.0;
  const double delta = d * d / (hbar * hbar * eps0 * c) * intensity / (omega * wr);
  const double tau_s = tau / wr;
  const int k = 200000;
  const double h = 16.0 * tau_s / k;
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double t = -8.0 * tau_s + i * h;
    const double s = 2.0 * intensity * std::exp(-0.5 * t * t / (tau_s * tau_s)) / isat;
    const double rate = gamma / (4.0 * kPi) * s / (1.0 + s + 4.0 * delta * delta / (gamma * gamma));
    sum += (i == 0 || i == k ? 0.5 : 1.0) * rate;
  }
  return sum * h;
}

double loss(double omega, double tau, double intensity) {
  return scattering_loss(GaussianPulse{.amplitude = omega, .duration = tau},
                         LaserBudget{.intensity = intensity});
}

double omega_for_detuning(double delta, double intensity) {
  const auto tr = rb87_d2();
  return from_physical(intensity_coupling(tr) * intensity / delta, QuantityKind::frequency, tr);
}

}  // namespace

TEST_CASE("scattering loss matches an independent integration") {
  for (double om : {5.0, 20.0, 130.0})
    for (double tau : {0.3, 1.0, 20.0})
      for (double intensity : {1e3, 1e4}) {
        CHECK(loss(om, tau, intensity) ==
              doctest::Approx(oracle_loss(om, tau, intensity)).epsilon(1e-6));
      }
}

TEST_CASE("no light, no loss") {
  const GaussianPulse p{.amplitude = 10.0, .duration = 1.0};
  CHECK(scattering_loss(p, LaserBudget{.intensity = 0.0}) == 0.0);
  CHECK(scattering_loss_approx(p, LaserBudget{.intensity = 0.0}) == 0.0);
}

TEST_CASE("approximation holds far from resonance") {
  const auto tr = rb87_d2();
  int checked = 0;
  for (double om : {2.0, 20.0, 100.0})
    for (double tau : {0.2, 1.0, 25.0})
      for (double intensity : {1e2, 1e3, 1e4, 3e4}) {
        if (detuning(om, intensity, tr) < 100.0 * tr.linewidth) continue;
        const GaussianPulse p{.amplitude = om, .duration = tau};
        const LaserBudget b{.intensity = intensity};
        CHECK(scattering_loss_approx(p, b) == doctest::Approx(scattering_loss(p, b)).epsilon(1e-2));
        ++checked;
      }
  CHECK(checked > 10);
}

TEST_CASE("omega_max scaling and errors") {
  const auto tr = rb87_d2();
  const double a = omega_max(1e5, 1.0, 0.01, tr);
  const double b = omega_max(2e5, 1.0, 0.01, tr);
  CHECK(b / a == doctest::Approx(std::sqrt(2.0)).epsilon(1e-3));
  // Radicand at or below zero.
  CHECK_THROWS_AS(omega_max(1e-5, 1.0, 0.01, tr), InfeasibleBudget);
  CHECK_THROWS_AS(omega_max(0.0, 1.0, 0.01, tr), ValidationError);
  CHECK_THROWS_AS(omega_max(1e4, 1.0, 1.5, tr), ValidationError);
  // Just above the threshold intensity the clamp is large but finite.
  const double tau_s = to_physical(1.0, QuantityKind::time, tr);
  const double i_min =
      tr.saturation_intensity / (tr.linewidth * tau_s / (std::sqrt(2.0 * kPi) * 0.01) - 2.0);
  const double near = omega_max(i_min * (1.0 + 1e-9), 1.0, 0.01, tr);
  CHECK(std::isfinite(near));
  CHECK(near > 1e3 * omega_max(2.0 * i_min, 1.0, 0.01, tr));
}

TEST_CASE("budget loop closes") {
  const auto tr = rb87_d2();
  for (double intensity : {1e3, 1e4, 2e4})
    for (double tau : {0.3, 1.0, 5.0})
      for (double s : {0.005, 0.01, 0.05}) {
        const double om = omega_max(intensity, tau, s, tr);
        if (detuning(om, intensity, tr) < 100.0 * tr.linewidth) continue;
        const GaussianPulse p{.amplitude = om, .duration = tau};
        const LaserBudget b{.intensity = intensity, .max_loss = s};
        CHECK(scattering_loss(p, b) == doctest::Approx(s).epsilon(2e-2));
        CHECK(scattering_loss_approx(p, b) == doctest::Approx(s).epsilon(1e-9));
      }
}

TEST_CASE("monotonicity") {
  const auto tr = rb87_d2();
  // Longer pulses scatter more at fixed Omega and I.
  double prev = 0.0;
  for (double tau : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    const double s = loss(20.0, tau, 1e4);
    CHECK(s > prev);
    prev = s;
  }
  // At fixed detuning more light scatters more.
  const double delta = 1e3 * tr.linewidth;
  prev = 0.0;
  for (double intensity : {1e2, 1e3, 1e4, 1e5}) {
    const double s = loss(omega_for_detuning(delta, intensity), 1.0, intensity);
    CHECK(s > prev);
    prev = s;
  }
  // At fixed Omega the detuning grows with I and the loss falls as 1/I.
  CHECK(loss(20.0, 1.0, 2e4) < loss(20.0, 1.0, 1e4));
  CHECK(loss(20.0, 1.0, 2e4) == doctest::Approx(0.5 * loss(20.0, 1.0, 1e4)).epsilon(1e-3));

  // The clamp loosens with the budget and the intensity, tightens with tau.
  CHECK(omega_max(1e4, 1.0, 0.02, tr) > omega_max(1e4, 1.0, 0.01, tr));
  CHECK(omega_max(2e4, 1.0, 0.01, tr) > omega_max(1e4, 1.0, 0.01, tr));
  CHECK(omega_max(1e4, 2.0, 0.01, tr) < omega_max(1e4, 1.0, 0.01, tr));
}

TEST_CASE("constrained optimisation") {
  const CloudSpec cloud{1, 0.1};
  const std::vector<double> taus{0.2, 0.4, 0.8, 1.6};
  CHECK_THROWS_AS(constrained_optimize(cloud, LaserBudget{.intensity = 1e-5}, taus),
                  InfeasibleBudget);
  CHECK_THROWS_AS(constrained_optimize(cloud, LaserBudget{.intensity = 1e4}, {}), ValidationError);

  // Abundant light: the clamp is inactive.
  const auto free = optimize_mirror(cloud);
  const auto rich = constrained_optimize(cloud, LaserBudget{.intensity = 1e9}, taus);
  CHECK(rich.fidelity == doctest::Approx(free.objective).epsilon(1e-3));
  CHECK_FALSE(rich.at_clamp);
  CHECK(rich.loss <= 0.01 * 1.02);
  CHECK(rich.scan.size() == taus.size());

  // Scarce light: the optimum sits on the clamp and loses fidelity.
  const auto poor = constrained_optimize(cloud, LaserBudget{.intensity = 1.0}, taus);
  CHECK(poor.omega_opt <= poor.omega_max * (1.0 + 1e-9));
  CHECK(poor.fidelity < free.objective);
  CHECK(poor.detuning == doctest::Approx(detuning(poor.omega_opt, 1.0, rb87_d2())));
}
