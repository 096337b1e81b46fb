#pragma once

// Truncated momentum ladder for one quasimomentum offset delta:
//
//   i dc_m/dt = (m + delta)^2 c_m + 1/2 [Omega(t) c_{m+2} + Omega*(t) c_{m-2}]
//
// in recoil units. Only orders with the parity of the Bragg order are
// coupled to the initial state c_{-n} = 1, so by default only those are kept.

#include <complex>
#include <optional>
#include <vector>

#include "braggkit/ode.hpp"
#include "braggkit/units.hpp"

namespace braggkit {

using Complex = std::complex<double>;

// Orders -max_order..max_order; either those sharing the parity of
// bragg_order (stride 2) or, in the debug full ladder, every integer.
struct Ladder {
  int bragg_order = 1;
  int max_order = 1;
  double offset = 0.0;  // delta [hbar k]
  bool full = false;

  Ladder() = default;
  Ladder(int bragg_order, int max_order, double offset, bool full = false);

  int stride() const { return full ? 1 : 2; }
  int min_order() const;
  int size() const;
  int order(int index) const { return min_order() + stride() * index; }
  std::optional<int> index_of(int m) const;
  double energy(int index) const;  // (m + delta)^2
  // Index distance between m and m + 2.
  int coupling_step() const { return full ? 2 : 1; }
};

// m_max = floor(sqrt(Omega + n^2) + 6) for even n (+7 for odd n), raised by
// one when its parity differs from n.
int truncation_order(int bragg_order, double omega);

// Orders added on top of truncation_order for strong drives (Omega > n^2).
// There the bare rule leaves transfer errors around 1e-5; below it they stay
// under 1e-8.
inline constexpr int kStrongDriveMargin = 4;

// Ladder half-width used for the numerics.
int working_order(int bragg_order, double omega, int strong_drive_margin = kStrongDriveMargin);

struct LadderState {
  Ladder ladder;
  std::vector<Complex> amplitudes;
  double time = 0.0;

  // c_{-n} = 1 on the given ladder.
  static LadderState initial(const Ladder& ladder, double time = 0.0);

  double norm() const;
  Complex amplitude(int m) const;  // throws for orders outside the ladder
};

struct EvolveOptions {
  OdeTolerances tolerances{};
  // Relative norm drift that aborts the evolution.
  double norm_tolerance = 1e-6;
  // Integrate in the interaction picture of the kinetic term.
  bool interaction_picture = false;
};

// Integrates the ladder equations from state.time to t_end (either direction)
// under the coherent sum of the sequence's pulses. Pulses vanish outside
// their windows; drive-free stretches use the exact diagonal propagator.
// The interval must cover the drive support.
LadderState evolve(const LadderState& initial, const PulseSequence& drive, double t_end,
                   const EvolveOptions& options = {});

double target_population(const LadderState& state, int m);

// Dense column-major square matrix over ladder indices.
struct ComplexMatrix {
  int dim = 0;
  std::vector<Complex> data;

  ComplexMatrix() = default;
  explicit ComplexMatrix(int n) : dim(n), data(static_cast<std::size_t>(n) * n) {}
  Complex& operator()(int row, int col) { return data[static_cast<std::size_t>(col) * dim + row]; }
  Complex operator()(int row, int col) const {
    return data[static_cast<std::size_t>(col) * dim + row];
  }
};

// Propagator over the pulse window [start, end] of a single pulse, all
// columns integrated together.
ComplexMatrix pulse_propagator(const Ladder& ladder, const GaussianPulse& pulse,
                               const EvolveOptions& options = {});

// Row `m` of the window propagator, obtained by integrating e_m backwards
// through the window (U^dagger e_m) and conjugating.
std::vector<Complex> pulse_propagator_row(const Ladder& ladder, const GaussianPulse& pulse, int m,
                                          const EvolveOptions& options = {});

// Column `m` of the window propagator (forward integration of e_m).
std::vector<Complex> pulse_propagator_column(const Ladder& ladder, const GaussianPulse& pulse,
                                             int m, const EvolveOptions& options = {});

// Rewrites a window propagator W = F(h) K F(h) to the pulse-centred kernel K,
// where F(t) = diag(exp(-i (m + delta)^2 t)) and h is the half window.
ComplexMatrix centred_kernel(const Ladder& ladder, const ComplexMatrix& window_propagator,
                             double half_window);

}  // namespace braggkit
