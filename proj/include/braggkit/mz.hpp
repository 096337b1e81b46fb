#pragma once

// Three-pulse Mach-Zehnder interferometer on the momentum ladder.
//
// Each pulse is reduced to its centred kernel K (window propagator with the
// free evolution of the half windows removed), so a sequence with pulse
// centres 0, T, 2T acts as K3 F(T) K2 F(T) K1 up to phases that do not touch
// populations, F(t) = diag(exp(-i (m + delta)^2 t)). A pulse phase phi enters
// as D K D^dagger with D = diag(exp(-i m phi / 2)).
//
// Paths through orders (a, b) in the two gaps pick up exp(-2 i delta T (a+b));
// grouping paths by a + b turns the momentum average into dephased_average,
// which handles the fast phases analytically.

#include <optional>
#include <string>
#include <vector>

#include "braggkit/fringe.hpp"
#include "braggkit/mirror.hpp"

namespace braggkit {

// Populations of -n and +n after a three-pulse sequence, averaged over the
// cloud. The scanned phase is added to the third pulse. Requires pulse centres
// spaced by a common T. sigma = 0 with a one-node rule gives the plane wave.
FringeScan mz_fringe(const CloudSpec& cloud, const PulseSequence& seq,
                     const std::vector<double>& phi_grid, const FidelityQuadrature& quad = {},
                     const SimulationOptions& sim = {});
FringeScan mz_fringe(int bragg_order, double sigma, const PulseSequence& seq,
                     const std::vector<double>& phi_grid, const QuadratureRule& standard_rule,
                     const SimulationOptions& sim = {});

// Populations of -n and +n for one atom at offset delta, composed from kernels.
std::pair<double, double> mz_node_populations(int bragg_order, double delta,
                                              const PulseSequence& seq,
                                              const SimulationOptions& sim = {});

struct MzPulses {
  double omega_bs = 0.0;
  double tau_bs = 1.0;
  double omega_m = 0.0;
  double tau_m = 1.0;
};

struct MzTimePoint {
  double interrogation_time = 0.0;
  double g = 0.0;
  double omega_bs = 0.0;
  double tau_bs = 0.0;
  GFactor detail;
};

struct MzResult {
  MzPulses pulses;  // beamsplitter from the longest interrogation time
  OptimizationResult mirror;
  double g_max = 0.0;  // extrapolated to T -> infinity
  double g_err = 0.0;
  bool clamped = false;
  int evaluations = 0;  // beamsplitter candidates
  bool converged = false;
  std::vector<MzTimePoint> per_time;
};

struct MzSearch {
  std::vector<double> interrogation_times{200.0, 400.0, 800.0};
  // The list is scaled up until its shortest entry is at least this many
  // times the longest pulse duration in the search box.
  double min_time_ratio = 20.0;
  int omega_points = 8;
  int tau_points = 8;
  double omega_span = 3.0;  // Omega_bs in [Omega_m / span, span Omega_m]
  double tau_lower = 0.25;  // tau_bs in [tau_lower tau_m, tau_upper tau_m]
  double tau_upper = 2.0;
  int max_evaluations = 60;  // per interrogation time
  int phi_points = 9;
  bool joint = false;        // also refine the mirror pulse
  int joint_evaluations = 80;
  MirrorSearch mirror{};     // mirror optimisation, quadrature, simulation

  void validate() const;
};

// Interrogation times actually used for a given longest pulse duration.
std::vector<double> scaled_interrogation_times(const MzSearch& search, double longest_tau);

// G for fixed pulses at each interrogation time.
std::vector<GFactor> mz_g_factors(const CloudSpec& cloud, const MzPulses& pulses,
                                  const std::vector<double>& interrogation_times,
                                  const MzSearch& search = {});

// Mirror frozen at the optimize_mirror optimum; beamsplitter seeded on a grid
// and refined per interrogation time; G extrapolated linearly in 1/T.
MzResult optimize_mz(const CloudSpec& cloud, std::optional<double> omega_max = std::nullopt,
                     const MzSearch& search = {});
// sigma = 0 gives the plane-wave limit.
MzResult optimize_mz(int bragg_order, double sigma, std::optional<double> omega_max = std::nullopt,
                     const MzSearch& search = {});

// Linear fit of g against 1/T; returns (intercept, spread).
std::pair<double, double> extrapolate_infinite_time(const std::vector<double>& times,
                                                    const std::vector<double>& g);

enum class SourceKind { thermal, expanded_bec, atom_laser, plane_wave };

std::string to_string(SourceKind kind);
SourceKind parse_source_kind(const std::string& name);

inline constexpr double kCondensedFluxRatio = 1.0 / 25.0;

struct SourceModel {
  SourceKind kind = SourceKind::thermal;
  double sigma = 1.0;   // [hbar k]; ignored for the plane wave
  double sigma0 = 1.0;  // unselected thermal width
  std::optional<double> flux_ratio;  // overrides the default N_i

  static SourceModel thermal(double sigma, double sigma0 = 1.0);
  static SourceModel expanded_bec(double sigma = 0.1);
  static SourceModel atom_laser(double sigma = 0.01);
  static SourceModel plane_wave();

  void validate() const;
  double atom_number() const;  // N_i relative to a 1 hbar k thermal source
  double effective_sigma() const;
};

// n sqrt(N_i) G_max
double g_eff(const SourceModel& source, int bragg_order, double g_max);

struct SourceRow {
  SourceModel source;
  int bragg_order = 1;
  MzResult mz;
  double g_eff = 0.0;
  bool best = false;  // best G_eff for this source kind
};

struct SourceComparison {
  std::vector<SourceRow> rows;
  const SourceRow* best(SourceKind kind) const;
};

// Thermal entries are expanded over thermal_sigmas (one row per sigma and n).
SourceComparison source_compare(const std::vector<SourceModel>& sources, int n_min, int n_max,
                                const std::vector<double>& thermal_sigmas,
                                std::optional<double> omega_max, const MzSearch& search = {});

}  // namespace braggkit
