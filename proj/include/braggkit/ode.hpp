#pragma once

// Adaptive Dormand-Prince 5(4) integrator for complex linear systems stored
// as interleaved (re, im) doubles. FSAL, PI step-size control (Hairer,
// Norsett & Wanner, Solving ODEs I, II.4).

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "braggkit/error.hpp"

namespace braggkit {

struct OdeTolerances {
  double rtol = 1e-10;
  double atol = 1e-12;
  long max_steps = 20'000'000;
};

struct OdeStats {
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
  double last_step = 0.0;
};

namespace dopri {
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// b5 - b4
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
}  // namespace dopri

// Integrates y' = rhs(t, y) from t0 to t1 (t1 > t0) in place. `h` is the
// initial step guess and on return holds the last accepted step size.
template <class Rhs>
OdeStats integrate_dopri5(Rhs&& rhs, double t0, double t1, std::vector<double>& y, double& h,
                          const OdeTolerances& tol) {
  using namespace dopri;
  OdeStats stats;
  if (!(t1 > t0)) return stats;
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n);

  auto eval = [&](double t, const std::vector<double>& in, std::vector<double>& out) {
    rhs(t, std::span<const double>(in), std::span<double>(out));
    ++stats.rhs_evals;
  };

  double t = t0;
  h = std::clamp(h, 1e-12 * (t1 - t0), t1 - t0);
  double err_prev = 1e-4;
  bool last_rejected = false;
  eval(t, y, k1);

  while (t < t1) {
    if (stats.steps + stats.rejected >= tol.max_steps) {
      throw IntegratorError("integrator: step budget exhausted at t=" + std::to_string(t));
    }
    const double h_free = h;
    bool final_step = false;
    if (t + 1.01 * h >= t1) {
      h = t1 - t;
      final_step = true;
    }
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
      throw IntegratorError("integrator: step size underflow at t=" + std::to_string(t));
    }

    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    eval(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    eval(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    eval(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    eval(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    const double t_new = final_step ? t1 : t + h;
    eval(t_new, ytmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    eval(t_new, ynew, k7);

    // Error norm per complex component.
    double err = 0.0;
    for (std::size_t i = 0; i < n; i += 2) {
      const double er = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      const double ei = h * (e1 * k1[i + 1] + e3 * k3[i + 1] + e4 * k4[i + 1] +
                             e5 * k5[i + 1] + e6 * k6[i + 1] + e7 * k7[i + 1]);
      const double mag = std::max(std::hypot(y[i], y[i + 1]), std::hypot(ynew[i], ynew[i + 1]));
      const double sc = tol.atol + tol.rtol * mag;
      err += (er * er + ei * ei) / (sc * sc);
    }
    err = std::sqrt(err / static_cast<double>(n / 2));

    if (err <= 1.0) {
      t = t_new;
      y.swap(ynew);
      k1.swap(k7);
      ++stats.steps;
      double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
      stats.last_step = h;
      h = final_step ? h_free : h * fac;
      err_prev = std::max(err, 1e-4);
      last_rejected = false;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
      last_rejected = true;
    }
  }
  return stats;
}

}  // namespace braggkit
