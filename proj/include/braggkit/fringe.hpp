#pragma once

// Interferometer fringes and the G-factor G = C sqrt(N).

#include <functional>
#include <utility>
#include <vector>

namespace braggkit {

struct FringeScan {
  int bragg_order = 1;
  std::vector<double> phi;
  std::vector<double> p_minus;  // P_{-n}(phi)
  std::vector<double> p_plus;   // P_{+n}(phi)
  std::vector<double> p_rel;    // P_{+n} / (P_{-n} + P_{+n})
  double p_rel_zero = 0.0;          // at phi = 0
  double p_rel_half_period = 0.0;   // at phi = pi/n
  double p_total = 0.0;             // P_{-n} + P_{+n} at mid-fringe phi = pi/2n
};

// 9 points spanning [0, 2 pi / n] inclusive.
std::vector<double> default_phi_grid(int bragg_order, int points = 9);

// Builds a scan from a callback returning (P_{-n}, P_{+n}) at a phase.
FringeScan make_fringe_scan(int bragg_order, const std::vector<double>& phi_grid,
                            const std::function<std::pair<double, double>(double)>& populations);

struct GFactor {
  double contrast = 0.0;
  double population = 0.0;  // N
  double g = 0.0;
  double sinusoid_r2 = 1.0;
  bool used_grid = false;  // contrast from max/min over the grid
  bool inverted = false;   // endpoint contrast came out negative
};

// Endpoint contrast P_rel(pi/n) - P_rel(0) when the fringe passes the
// sinusoid check (R^2 >= 0.99) and is upright; otherwise max - min over the
// scan grid.
GFactor g_factor(const FringeScan& scan);

// R^2 of a least-squares fit a + b cos(n phi) + c sin(n phi).
double sinusoid_r2(int bragg_order, const std::vector<double>& phi,
                   const std::vector<double>& values);

}  // namespace braggkit
