#include <cmath>
#include <complex>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

#include "braggkit/dephasing.hpp"
#include "braggkit/error.hpp"
#include "braggkit/fringe.hpp"
#include "braggkit/optimize.hpp"
#include "braggkit/parallel.hpp"
#include "braggkit/quadrature.hpp"
#include "doctest.h"

using namespace braggkit;
using Complex = std::complex<double>;

namespace {

double double_factorial(int k) {
  double r = 1.0;
  for (int i = k; i > 1; i -= 2) r *= i;
  return r;
}

double moment(const QuadratureRule& rule, int k) {
  double m = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) m += rule.weights[i] * std::pow(rule.nodes[i], k);
  return m;
}

}  // namespace

TEST_CASE("gauss-hermite rule reproduces normal moments") {
  for (int points : {1, 2, 5, 20, 41, 81}) {
    const auto rule = gauss_hermite_normal(points);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(points));
    CHECK(std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-13));
    for (int k = 0; k < std::min(2 * points, 30); ++k) {
      const double exact = k % 2 ? 0.0 : double_factorial(k - 1);
      const double size = double_factorial(k % 2 ? k : k - 1);
      CHECK(std::abs(moment(rule, k) - exact) <= 1e-11 * size);
    }
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const std::size_t j = rule.nodes.size() - 1 - i;
      CHECK(std::abs(rule.nodes[i] - (-rule.nodes[j])) <= 1e-12);
      CHECK(rule.weights[i] == doctest::Approx(rule.weights[j]).epsilon(1e-10));
    }
  }
  const auto one = gauss_hermite_normal(1);
  CHECK(one.nodes[0] == 0.0);
  CHECK(one.weights[0] == 1.0);
  CHECK_THROWS_AS(gauss_hermite_normal(0), ValidationError);
}

TEST_CASE("gauss-legendre and truncated normal rules") {
  const auto gl = gauss_legendre(6, -1.0, 2.0);
  double integral = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i)
    integral += gl.weights[i] * std::pow(gl.nodes[i], 11);
  CHECK(integral == doctest::Approx((std::pow(2.0, 12) - 1.0) / 12.0).epsilon(1e-12));

  const auto nl = normal_legendre(24, 8, 5.0);
  CHECK(std::accumulate(nl.weights.begin(), nl.weights.end(), 0.0) == doctest::Approx(1.0));
  CHECK(std::abs(moment(nl, 1) - (0.0)) <= 1e-13);
  // Truncation at 5 sigma changes the second moment by ~1e-5.
  CHECK(moment(nl, 2) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK_THROWS_AS(normal_legendre(0, 8, 5.0), ValidationError);

  const auto s = scaled(gauss_hermite_normal(21), 0.3);
  CHECK(moment(s, 2) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("dephased average against the gaussian characteristic function") {
  const auto rule = gauss_hermite_normal(61);
  const std::vector<Complex> a{{0.3, 0.4}, {-0.5, 0.1}, {0.2, -0.6}};
  const std::vector<double> rates{-1.5, 0.0, 0.8};
  std::vector<std::vector<Complex>> amps(rule.nodes.size(), a);

  double exact = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    exact += std::norm(a[s]);
    for (std::size_t q = s + 1; q < a.size(); ++q) {
      const double dr = rates[s] - rates[q];
      exact += 2.0 * std::real(a[s] * std::conj(a[q])) * std::exp(-0.5 * dr * dr);
    }
  }
  CHECK(dephased_average(rule, amps, rates) == doctest::Approx(exact).epsilon(1e-12));

  // Rates far apart: cross terms vanish.
  const std::vector<double> far{-40.0, 0.0, 40.0};
  double incoherent = 0.0;
  for (const auto& z : a) incoherent += std::norm(z);
  CHECK(dephased_average(rule, amps, far) == doctest::Approx(incoherent).epsilon(1e-14));

  amps.pop_back();
  CHECK_THROWS_AS(dephased_average(rule, amps, rates), ValidationError);
}

TEST_CASE("phi grid") {
  const auto g = default_phi_grid(3);
  REQUIRE(g.size() == 9);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(2.0 * M_PI / 3.0));
  CHECK_THROWS_AS(default_phi_grid(0), ValidationError);
}

TEST_CASE("g factor limits") {
  for (int n : {1, 2, 4}) {
    const auto grid = default_phi_grid(n);
    const auto perfect = make_fringe_scan(n, grid, [n](double phi) {
      const double p = std::sin(0.5 * n * phi) * std::sin(0.5 * n * phi);
      return std::pair{1.0 - p, p};
    });
    const auto g = g_factor(perfect);
    CHECK(g.contrast == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.population == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.g == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(g.used_grid);
    CHECK(g.sinusoid_r2 == doctest::Approx(1.0));

    const auto flat = make_fringe_scan(n, grid, [](double) { return std::pair{0.3, 0.3}; });
    CHECK(g_factor(flat).g == 0.0);
  }

  // Lossy, partial contrast: P_rel = 0.5 - 0.3 cos(n phi), N = 0.64.
  const int n = 2;
  const auto lossy = make_fringe_scan(n, default_phi_grid(n), [](double phi) {
    const double rel = 0.5 - 0.3 * std::cos(2.0 * phi);
    return std::pair{0.64 * (1.0 - rel), 0.64 * rel};
  });
  const auto g = g_factor(lossy);
  CHECK(g.contrast == doctest::Approx(0.6));
  CHECK(g.population == doctest::Approx(0.64));
  CHECK(g.g == doctest::Approx(0.48));

  // Inverted fringe falls back to max - min.
  const auto inverted = make_fringe_scan(n, default_phi_grid(n), [](double phi) {
    const double rel = 0.5 + 0.4 * std::cos(2.0 * phi);
    return std::pair{1.0 - rel, rel};
  });
  const auto gi = g_factor(inverted);
  CHECK(gi.inverted);
  CHECK(gi.used_grid);
  CHECK(gi.contrast == doctest::Approx(0.8));
}

TEST_CASE("nelder-mead on a box-constrained quadratic") {
  const Objective f = [](const std::vector<double>& x) {
    return (x[0] - 0.3) * (x[0] - 0.3) + 4.0 * (x[1] + 0.2) * (x[1] + 0.2);
  };
  const auto r = nelder_mead(f, {0.9, 0.9}, {-1.0, -1.0}, {1.0, 1.0});
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(r.x[1] == doctest::Approx(-0.2).epsilon(1e-3));
  CHECK(r.evaluations <= 200);

  // Minimum outside the box lands on the boundary.
  const auto b = nelder_mead(f, {0.9, 0.9}, {0.5, 0.0}, {1.0, 1.0});
  CHECK(b.x[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(std::abs(b.x[1] - (0.0)) <= 1e-3);

  NelderMeadOptions tight;
  tight.max_evaluations = 5;
  CHECK_FALSE(nelder_mead(f, {0.9, 0.9}, {-1.0, -1.0}, {1.0, 1.0}, tight).converged);
  CHECK_THROWS_AS(nelder_mead(f, {0.0}, {-1.0, -1.0}, {1.0, 1.0}), ValidationError);
}

TEST_CASE("parallel map keeps index order and propagates errors") {
  for (int threads : {1, 2, 7}) {
    const auto out = parallel_map(
        100, [](std::size_t i) { return static_cast<double>(i * i); }, threads);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<double>(i * i));
    CHECK_THROWS_AS(parallel_map(
                        50,
                        [](std::size_t i) -> int {
                          if (i == 17) throw std::runtime_error("boom");
                          return 0;
                        },
                        threads),
                    std::runtime_error);
  }
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  setenv("BRAGGKIT_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  CHECK(resolve_threads(2) == 2);
  setenv("BRAGGKIT_THREADS", "zero", 1);
  CHECK_THROWS_AS(resolve_threads(0), ValidationError);
  unsetenv("BRAGGKIT_THREADS");
  CHECK(resolve_threads(0) >= 1);
}
