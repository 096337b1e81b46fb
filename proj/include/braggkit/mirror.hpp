#pragma once

// Bragg mirror: Gaussian-averaged transfer -n -> +n for a single pulse and its
// optimisation over peak Rabi frequency and duration.

#include <optional>
#include <utility>
#include <vector>

#include "braggkit/ladder.hpp"
#include "braggkit/quadrature.hpp"
#include "braggkit/units.hpp"

namespace braggkit {

struct SimulationOptions {
  EvolveOptions evolve{};
  int strong_drive_margin = kStrongDriveMargin;
  int threads = 0;  // 0: BRAGGKIT_THREADS, else hardware concurrency
};

inline constexpr int kQuadratureRefinement = 20;
inline constexpr double kQuadratureTolerance = 1e-4;

// Discretisation of the momentum average. The primary rule is Gauss-Hermite
// in the standard-normal variable xi = delta / sigma; the fallback is a
// composite Gauss-Legendre rule on |xi| <= cutoff.
struct FidelityQuadrature {
  int nodes = 41;
  double cutoff = 5.0;
  int fallback_panels = 24;
  int fallback_points = 8;

  void validate() const;
  QuadratureRule standard_rule() const;
  QuadratureRule refined_rule() const;  // nodes + kQuadratureRefinement
  QuadratureRule fallback_rule() const;
};

// Ladder at offset delta sized for the pulse.
Ladder pulse_ladder(int bragg_order, double delta, const GaussianPulse& pulse,
                    const SimulationOptions& sim = {});

// |c_{+n}|^2 after the pulse window for an atom starting in -n.
double transfer_probability(int bragg_order, double delta, const GaussianPulse& pulse,
                            const SimulationOptions& sim = {});

struct MirrorPopulations {
  double target = 0.0;   // weighted P_{+n}
  double initial = 0.0;  // weighted P_{-n}
  double off_order() const { return 1.0 - target - initial; }
};

// Weighted populations over a standard-normal rule scaled by the cloud width.
MirrorPopulations mirror_populations(const CloudSpec& cloud, const GaussianPulse& pulse,
                                     const QuadratureRule& standard_rule,
                                     const SimulationOptions& sim = {});

// F = E[|c_{+n}(delta)|^2]. The transfer is even in delta for a real,
// time-symmetric pulse, so mirrored nodes share one integration.
double mirror_fidelity(const CloudSpec& cloud, const GaussianPulse& pulse,
                       const QuadratureRule& standard_rule, const SimulationOptions& sim = {});
double mirror_fidelity(const CloudSpec& cloud, const GaussianPulse& pulse,
                       const FidelityQuadrature& quad = {}, const SimulationOptions& sim = {});

struct OptimizationResult {
  double omega_opt = 0.0;
  double tau_opt = 0.0;
  double objective = 0.0;
  bool clamped = false;   // a Rabi-frequency clamp was imposed
  bool at_clamp = false;  // and the optimum sits on it
  int evaluations = 0;
  bool converged = false;             // refinement met its tolerances
  bool quadrature_converged = true;   // refined rule agreed within kQuadratureTolerance
};

struct MirrorSearch {
  int omega_points = 12;
  int tau_points = 12;
  int max_evaluations = 200;  // refinement budget
  double tau_min = 0.02;
  double tau_cap = 60.0;
  // With a clamp the duration may run past the first Rabi cycle by this factor.
  double clamped_cycle_factor = 2.0;
  double tie_tolerance = 1e-4;
  std::optional<double> omega_lower;
  std::optional<double> omega_upper;
  // Extra (omega, tau) starting candidates evaluated with the grid.
  std::vector<std::pair<double, double>> seeds;
  FidelityQuadrature quadrature{};
  SimulationOptions simulation{};

  void validate() const;
};

// Peak Rabi frequency search interval for order n, capped by the clamp.
std::pair<double, double> mirror_omega_range(int bragg_order, std::optional<double> omega_max,
                                             const MirrorSearch& search = {});

// End of the first on-resonance Rabi cycle: the first local minimum of the
// delta = 0 transfer after it has peaked, found by a geometric scan in tau.
// Returns tau_cap when the cycle does not close below it.
double first_rabi_cycle(int bragg_order, double omega, double tau_min, double tau_cap,
                        const SimulationOptions& sim = {});

// Grid seeding in (log Omega, s) with tau = tau_min (tau_hi(Omega)/tau_min)^s,
// then Nelder-Mead. Among evaluated points within tie_tolerance of the best,
// the smallest Omega wins.
OptimizationResult optimize_mirror(const CloudSpec& cloud,
                                   std::optional<double> omega_max = std::nullopt,
                                   const MirrorSearch& search = {});

// F^q: q independent pulses.
double sequential_fidelity(double single_pulse_fidelity, int repetitions);

struct CuspRow {
  double sigma = 0.0;
  OptimizationResult optimum;
  double off_order_loss = 0.0;
  bool cusp = false;
};

struct CuspScan {
  int bragg_order = 1;
  std::vector<CuspRow> rows;
  std::optional<double> sigma_cusp;  // first sigma whose loss exceeds the threshold
};

inline constexpr double kDefaultCuspThreshold = 0.01;

// Optimised mirror per sigma (ascending grid) with the population left outside
// {-n, +n}. Each optimisation is seeded with the previous optimum.
CuspScan cusp_scan(int bragg_order, const std::vector<double>& sigma_grid,
                   std::optional<double> omega_max = std::nullopt, const MirrorSearch& search = {},
                   double threshold = kDefaultCuspThreshold);

}  // namespace braggkit
