#include "braggkit/fringe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "braggkit/error.hpp"

namespace braggkit {

namespace {

double relative(double minus, double plus) {
  const double total = minus + plus;
  return total > 0.0 ? plus / total : 0.0;
}

}  // namespace

std::vector<double> default_phi_grid(int bragg_order, int points) {
  if (bragg_order < 1 || points < 2) throw ValidationError("phi grid: bad arguments");
  const double period = 2.0 * std::numbers::pi / bragg_order;
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) grid[k] = period * k / (points - 1);
  return grid;
}

FringeScan make_fringe_scan(int bragg_order, const std::vector<double>& phi_grid,
                            const std::function<std::pair<double, double>(double)>& populations) {
  FringeScan scan;
  scan.bragg_order = bragg_order;
  scan.phi = phi_grid;
  for (double phi : phi_grid) {
    const auto [minus, plus] = populations(phi);
    scan.p_minus.push_back(minus);
    scan.p_plus.push_back(plus);
    scan.p_rel.push_back(relative(minus, plus));
  }
  const double pi_n = std::numbers::pi / bragg_order;
  {
    const auto [m, p] = populations(0.0);
    scan.p_rel_zero = relative(m, p);
  }
  {
    const auto [m, p] = populations(pi_n);
    scan.p_rel_half_period = relative(m, p);
  }
  {
    const auto [m, p] = populations(0.5 * pi_n);
    scan.p_total = m + p;
  }
  return scan;
}

double sinusoid_r2(int n, const std::vector<double>& phi, const std::vector<double>& v) {
  const std::size_t k = phi.size();
  if (k < 4) return 1.0;
  // Normal equations for [1, cos, sin].
  std::array<std::array<double, 4>, 3> a{};
  for (std::size_t i = 0; i < k; ++i) {
    const std::array<double, 3> basis{1.0, std::cos(n * phi[i]), std::sin(n * phi[i])};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += basis[r] * basis[c];
      a[r][3] += basis[r] * v[i];
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    if (std::abs(a[col][col]) < 1e-300) return 1.0;
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  const double c0 = a[0][3] / a[0][0];
  const double c1 = a[1][3] / a[1][1];
  const double c2 = a[2][3] / a[2][2];
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(k);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double fit = c0 + c1 * std::cos(n * phi[i]) + c2 * std::sin(n * phi[i]);
    ss_res += (v[i] - fit) * (v[i] - fit);
    ss_tot += (v[i] - mean) * (v[i] - mean);
  }
  if (ss_tot <= 1e-24) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

GFactor g_factor(const FringeScan& scan) {
  GFactor out;
  out.population = std::max(0.0, scan.p_total);
  out.sinusoid_r2 = sinusoid_r2(scan.bragg_order, scan.phi, scan.p_rel);
  const double endpoint = scan.p_rel_half_period - scan.p_rel_zero;
  out.inverted = endpoint < 0.0;
  if (out.sinusoid_r2 >= 0.99 && !out.inverted) {
    out.contrast = endpoint;
  } else {
    double hi = std::max(scan.p_rel_zero, scan.p_rel_half_period);
    double lo = std::min(scan.p_rel_zero, scan.p_rel_half_period);
    for (double v : scan.p_rel) {
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    out.contrast = hi - lo;
    out.used_grid = true;
  }
  out.g = out.contrast * std::sqrt(out.population);
  return out;
}

}  // namespace braggkit
