#pragma once

// Spontaneous-emission loss of a far-detuned Bragg pulse and the Rabi
// frequency clamp it implies. SI units live here only: intensities in W/m^2,
// detunings and linewidths in rad/s. Pulse parameters stay in recoil units.

#include <optional>
#include <vector>

#include "braggkit/mirror.hpp"
#include "braggkit/units.hpp"

namespace braggkit {

struct LaserBudget {
  double intensity = 1e4;  // per beam [W/m^2]
  double max_loss = 0.01;  // tolerated scattered fraction
  AtomicTransition transition = rb87_d2();

  void validate() const;
};

inline constexpr int kLossSimpsonPoints = 2001;

// d^2 / (hbar^2 eps0 c): Omega = coupling * I / Delta in rad/s.
double intensity_coupling(const AtomicTransition& transition);

// Single-photon detuning [rad/s] giving two-photon Rabi frequency `omega`
// (recoil units) at per-beam intensity I.
double detuning(double omega, double intensity, const AtomicTransition& transition);

// Scattered fraction over the pulse window, Simpson's rule on the Gaussian
// intensity envelope with the doubled (counter-propagating) intensity.
double scattering_loss(const GaussianPulse& pulse, const LaserBudget& budget,
                       int simpson_points = kLossSimpsonPoints);

// Same with the time dependence of the denominator ignored.
double scattering_loss_approx(const GaussianPulse& pulse, const LaserBudget& budget);

// Largest two-photon Rabi frequency (recoil units) keeping the approximate
// loss at or below max_loss for a pulse of duration tau (recoil units).
// Throws InfeasibleBudget when no Rabi frequency satisfies the budget.
double omega_max(double intensity, double tau, double max_loss,
                 const AtomicTransition& transition);

struct ConstrainedPoint {
  double tau = 0.0;
  bool feasible = false;
  double omega_max = 0.0;  // recoil units, when feasible
  double omega_opt = 0.0;
  double fidelity = 0.0;
};

struct ConstrainedResult {
  double omega_opt = 0.0;
  double tau_opt = 0.0;
  double fidelity = 0.0;
  double omega_max = 0.0;  // clamp at tau_opt
  double detuning = 0.0;   // rad/s
  double loss = 0.0;       // numerically integrated at the optimum
  bool at_clamp = false;
  int evaluations = 0;
  std::vector<ConstrainedPoint> scan;
};

struct ConstrainedSearch {
  int omega_points = 8;
  int max_evaluations = 40;  // per tau, then again for the joint polish
  MirrorSearch mirror{};     // omega range, quadrature and simulation settings

  void validate() const;
};

// For each tau on the grid, maximises the fidelity over Omega <= Omega_max(I,
// tau, S); the best point is then polished jointly in (Omega, tau) within the
// grid's tau range. Throws InfeasibleBudget if every tau is infeasible.
ConstrainedResult constrained_optimize(const CloudSpec& cloud, const LaserBudget& budget,
                                       const std::vector<double>& tau_grid,
                                       const ConstrainedSearch& search = {});

}  // namespace braggkit
