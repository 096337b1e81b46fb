#include "braggkit/two_level.hpp"

#include <cmath>
#include <numbers>

#include "braggkit/dephasing.hpp"
#include "braggkit/error.hpp"

namespace braggkit {

namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

}  // namespace

double effective_rabi(double omega, int n) {
  if (n < 1) throw ValidationError("effective_rabi: n must be >= 1");
  if (!(omega >= 0.0)) throw ValidationError("effective_rabi: omega must be >= 0");
  if (omega == 0.0) return 0.0;
  if (n == 1) return omega;
  const double log_value =
      n * std::log(omega) - (n - 1) * std::log(8.0) - 2.0 * std::lgamma(static_cast<double>(n));
  return std::exp(log_value);
}

double bragg_regime_bound(int n) {
  if (n < 1) throw ValidationError("bragg_regime_bound: n must be >= 1");
  if (n == 1) return 8.0;
  return std::exp(std::log(8.0) + n * std::log(n - 1.0) - 2.0 * std::lgamma(static_cast<double>(n)));
}

TwoLevelParams TwoLevelParams::from_physical(int n, double omega, double delta, double sigma,
                                             double time) {
  TwoLevelParams p;
  p.omega_eff = effective_rabi(omega, n);
  if (!(p.omega_eff > 0.0)) throw ValidationError("two-level: omega must be > 0");
  p.x = 4.0 * n * delta / p.omega_eff;
  p.w = 4.0 * n * sigma / p.omega_eff;
  p.t_tilde = p.omega_eff * time;
  p.outside_bragg_regime = p.omega_eff >= bragg_regime_bound(n);
  return p;
}

double two_level_population(double x, double t_tilde) {
  const double r = std::sqrt(1.0 + x * x);
  const double s = std::sin(0.5 * t_tilde * r);
  return s * s / (1.0 + x * x);
}

Matrix2 two_level_pulse(double x, double t_tilde, double phi, int n) {
  const double r = std::sqrt(1.0 + x * x);
  const double c = std::cos(0.5 * r * t_tilde);
  const double s = std::sin(0.5 * r * t_tilde);
  const Complex i(0.0, 1.0);
  Matrix2 u{};
  // Diagonal signs follow H = diag(-x/2, x/2) + 1/2 sigma_x, the generator of
  // the free-evolution matrix below.
  u[0][0] = c + i * (x / r) * s;
  u[0][1] = -i * std::polar(1.0, -n * phi) * (s / r);
  u[1][0] = -i * std::polar(1.0, n * phi) * (s / r);
  u[1][1] = c - i * (x / r) * s;
  return u;
}

Matrix2 two_level_free(double x, double t_tilde) {
  Matrix2 u{};
  u[0][0] = std::polar(1.0, 0.5 * x * t_tilde);
  u[1][1] = std::polar(1.0, -0.5 * x * t_tilde);
  return u;
}

int two_level_node_count(double w) {
  // The integrands oscillate on a unit scale in x; node spacing in x is
  // roughly w * pi / sqrt(2N).
  const double needed = 41.0 + 60.0 * w * w;
  return static_cast<int>(std::min(needed, 801.0)) | 1;
}

QuadratureRule two_level_rule(double w) {
  if (!(w >= 0.0)) throw ValidationError("two-level: w must be >= 0");
  if (w == 0.0) return gauss_hermite_normal(1);
  if (w <= 5.0) return gauss_hermite_normal(two_level_node_count(w));
  constexpr double kCutoff = 8.0;
  const int panels = static_cast<int>(std::ceil(2.0 * kCutoff * w / 0.5));
  return normal_legendre(panels, 8, kCutoff);
}

double two_level_fidelity(double w, const QuadratureRule& rule) {
  if (!(w >= 0.0)) throw ValidationError("two_level_fidelity: w must be >= 0");
  if (w == 0.0) return 1.0;
  double f = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    f += rule.weights[i] * two_level_population(w * rule.nodes[i], kPi);
  }
  return f;
}

double two_level_fidelity(double w, int nodes) {
  if (!(w >= 0.0)) throw ValidationError("two_level_fidelity: w must be >= 0");
  if (w == 0.0) return 1.0;
  return two_level_fidelity(w, nodes > 0 ? gauss_hermite_normal(nodes) : two_level_rule(w));
}

double two_level_single_pulse_transfer(double w, const QuadratureRule& rule) {
  std::vector<std::vector<Complex>> amps;
  for (double xi : rule.nodes) {
    const Matrix2 u = two_level_pulse(w * xi, kPi, 0.0, 1);
    amps.push_back({u[1][0]});
  }
  const double rate = 0.0;
  return dephased_average(rule, amps, std::span<const double>(&rate, 1));
}

TwoLevelMz two_level_mz(double w, double t_int, const std::vector<double>& phi_grid, int n,
                        const QuadratureRule& rule) {
  if (!(w >= 0.0)) throw ValidationError("two_level_mz: w must be >= 0");
  if (!(t_int >= 0.0)) throw ValidationError("two_level_mz: interrogation time must be >= 0");
  // Free-evolution phase of a path through states (a, b) is
  // exp(i x T (s_a + s_b) / 2), s = +1 for -n and -1 for +n. Sectors S = 2, 0, -2.
  const std::array<double, 3> rates{w * t_int, 0.0, -w * t_int};
  auto sector = [](int a, int b) {
    const int s = (a == 0 ? 1 : -1) + (b == 0 ? 1 : -1);
    return s == 2 ? 0 : (s == 0 ? 1 : 2);
  };

  auto populations = [&](double phi) {
    std::vector<std::vector<Complex>> minus(rule.nodes.size()), plus(rule.nodes.size());
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = w * rule.nodes[i];
      const Matrix2 u1 = two_level_pulse(x, 0.5 * kPi, 0.0, n);
      const Matrix2 u2 = two_level_pulse(x, kPi, 0.0, n);
      const Matrix2 u3 = two_level_pulse(x, 0.5 * kPi, phi, n);
      std::array<Complex, 3> ym{}, yp{};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const Complex amp = u2[b][a] * u1[a][0];
          ym[sector(a, b)] += u3[0][b] * amp;
          yp[sector(a, b)] += u3[1][b] * amp;
        }
      }
      minus[i].assign(ym.begin(), ym.end());
      plus[i].assign(yp.begin(), yp.end());
    }
    return std::pair{dephased_average(rule, minus, rates), dephased_average(rule, plus, rates)};
  };

  TwoLevelMz out;
  out.scan = make_fringe_scan(n, phi_grid, populations);
  out.g = g_factor(out.scan);
  return out;
}

TwoLevelMz two_level_mz(double w, double t_int, const std::vector<double>& phi_grid, int n,
                        int nodes) {
  if (w == 0.0 || nodes <= 0) return two_level_mz(w, t_int, phi_grid, n, two_level_rule(w));
  return two_level_mz(w, t_int, phi_grid, n, gauss_hermite_normal(nodes));
}

}  // namespace braggkit
