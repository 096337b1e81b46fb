#pragma once

// Two-level Bragg-regime model: the intermediate orders between -n and +n are
// adiabatically eliminated and the pair is driven at the effective 2n-photon
// Rabi frequency. Everything is expressed in the scaled variables
//
//   x = 4 n delta / Omega_eff,  w = 4 n sigma / Omega_eff,  t~ = Omega_eff t.

#include <array>
#include <complex>
#include <vector>

#include "braggkit/fringe.hpp"
#include "braggkit/quadrature.hpp"

namespace braggkit {

// Omega^n / (8^{n-1} [(n-1)!]^2) in recoil units, evaluated in log space.
double effective_rabi(double omega, int bragg_order);

// Upper end of the regime where the two-level reduction holds:
// 8 (n-1)^n / [(n-1)!]^2. For n = 1 there are no intermediate orders and the
// nearest uncoupled order (+-3) sits 8 w_r away, so 8 is returned.
double bragg_regime_bound(int bragg_order);

struct TwoLevelParams {
  double x = 0.0;
  double w = 0.0;
  double omega_eff = 0.0;
  double t_tilde = 0.0;
  bool outside_bragg_regime = false;

  static TwoLevelParams from_physical(int bragg_order, double omega, double delta, double sigma,
                                      double time);
};

// sin^2((t~/2) sqrt(1+x^2)) / (1+x^2)
double two_level_population(double x, double t_tilde);

using Matrix2 = std::array<std::array<std::complex<double>, 2>, 2>;

// Pulse propagator U(t~, phi) on (c_{-n}, c_{+n}) at detuning x.
Matrix2 two_level_pulse(double x, double t_tilde, double phi, int bragg_order);
// Free evolution diag(exp(i x t~/2), exp(-i x t~/2)).
Matrix2 two_level_free(double x, double t_tilde);

// Node count that resolves the two-level integrands at width w.
int two_level_node_count(double w);

// Standard-normal rule for width w: Gauss-Hermite with two_level_node_count
// nodes up to w = 5. Wider distributions put most Hermite nodes far outside
// the |x| < few region that carries the integrand, so beyond that a
// composite Gauss-Legendre rule on |xi| <= 8 with panels 0.5 wide in x is
// used instead.
QuadratureRule two_level_rule(double w);

// Gaussian-averaged pi-pulse transfer. w = 0 returns exactly 1.
// nodes = 0 selects two_level_rule(w).
double two_level_fidelity(double w, int nodes = 0);
double two_level_fidelity(double w, const QuadratureRule& standard_rule);

struct TwoLevelMz {
  FringeScan scan;
  GFactor g;
};

inline constexpr double kDefaultTwoLevelInterrogation = 1e3;

// pi/2 - T - pi - T - pi/2(phi) sequence of square two-level pulses, averaged
// over the Gaussian in x with width w.
TwoLevelMz two_level_mz(double w, double t_tilde_interrogation, const std::vector<double>& phi_grid,
                        int bragg_order = 1, int nodes = 0);
TwoLevelMz two_level_mz(double w, double t_tilde_interrogation, const std::vector<double>& phi_grid,
                        int bragg_order, const QuadratureRule& standard_rule);

// The same machinery run as a single pi pulse: population in +n.
double two_level_single_pulse_transfer(double w, const QuadratureRule& standard_rule);

}  // namespace braggkit
