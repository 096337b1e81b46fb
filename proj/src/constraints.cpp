#include "braggkit/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "braggkit/error.hpp"
#include "braggkit/optimize.hpp"

namespace braggkit {

namespace {

constexpr double kHbar = 1.054571817e-34;
constexpr double kEpsilon0 = 8.8541878128e-12;
constexpr double kLightSpeed = 299792458.0;

double loss_rate(double intensity_now, double delta, const AtomicTransition& tr) {
  const double s = 2.0 * intensity_now / tr.saturation_intensity;
  const double g = tr.linewidth;
  return g / (4.0 * std::numbers::pi) * s / (1.0 + s + 4.0 * delta * delta / (g * g));
}

}  // namespace

void LaserBudget::validate() const {
  transition.validate();
  if (!(intensity >= 0.0)) throw ValidationError("budget: intensity must be >= 0");
  if (!(max_loss > 0.0 && max_loss < 1.0)) {
    throw ValidationError("budget: max_loss must lie in (0, 1)");
  }
}

double intensity_coupling(const AtomicTransition& transition) {
  transition.validate();
  const double d = transition.dipole_moment;
  return d * d / (kHbar * kHbar * kEpsilon0 * kLightSpeed);
}

double detuning(double omega, double intensity, const AtomicTransition& transition) {
  if (!(omega > 0.0)) throw ValidationError("detuning: omega must be positive");
  const double omega_si = to_physical(omega, QuantityKind::frequency, transition);
  return intensity_coupling(transition) * intensity / omega_si;
}

double scattering_loss(const GaussianPulse& pulse, const LaserBudget& budget, int simpson_points) {
  pulse.validate();
  budget.validate();
  if (simpson_points < 3 || simpson_points % 2 == 0) {
    throw ValidationError("scattering_loss: Simpson needs an odd point count >= 3");
  }
  if (budget.intensity == 0.0) return 0.0;
  const auto& tr = budget.transition;
  const double delta = detuning(pulse.amplitude, budget.intensity, tr);
  const double tau_s = to_physical(pulse.duration, QuantityKind::time, tr);
  const double half = kGaussianWindowWidths * tau_s;
  const int intervals = simpson_points - 1;
  const double h = 2.0 * half / intervals;
  double sum = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double t = -half + i * h;
    const double intensity_now = budget.intensity * std::exp(-0.5 * t * t / (tau_s * tau_s));
    const double wgt = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += wgt * loss_rate(intensity_now, delta, tr);
  }
  return sum * h / 3.0;
}

double scattering_loss_approx(const GaussianPulse& pulse, const LaserBudget& budget) {
  pulse.validate();
  budget.validate();
  if (budget.intensity == 0.0) return 0.0;
  const auto& tr = budget.transition;
  const double delta = detuning(pulse.amplitude, budget.intensity, tr);
  const double tau_s = to_physical(pulse.duration, QuantityKind::time, tr);
  return std::sqrt(2.0 * std::numbers::pi) * tau_s * loss_rate(budget.intensity, delta, tr);
}

double omega_max(double intensity, double tau, double max_loss, const AtomicTransition& transition) {
  transition.validate();
  if (!(intensity > 0.0)) throw ValidationError("omega_max: intensity must be positive");
  if (!(tau > 0.0)) throw ValidationError("omega_max: tau must be positive");
  if (!(max_loss > 0.0 && max_loss < 1.0)) {
    throw ValidationError("omega_max: max_loss must lie in (0, 1)");
  }
  const double g = transition.linewidth;
  const double tau_s = to_physical(tau, QuantityKind::time, transition);
  const double radicand =
      (g * tau_s / (std::sqrt(2.0 * std::numbers::pi) * max_loss) - 2.0) *
          (intensity / transition.saturation_intensity) -
      1.0;
  if (!(radicand > 0.0)) {
    throw InfeasibleBudget("no Rabi frequency keeps the loss within budget at this intensity "
                           "and duration");
  }
  const double omega_si =
      2.0 * intensity_coupling(transition) * intensity / g / std::sqrt(radicand);
  return from_physical(omega_si, QuantityKind::frequency, transition);
}

void ConstrainedSearch::validate() const {
  if (omega_points < 1) throw ValidationError("constrained search: omega_points must be >= 1");
  if (max_evaluations < 1) throw ValidationError("constrained search: need evaluations");
  mirror.validate();
}

ConstrainedResult constrained_optimize(const CloudSpec& cloud, const LaserBudget& budget,
                                       const std::vector<double>& tau_grid,
                                       const ConstrainedSearch& search) {
  cloud.validate();
  budget.validate();
  search.validate();
  if (tau_grid.empty()) throw ValidationError("constrained_optimize: empty tau grid");
  for (double t : tau_grid) {
    if (!(t > 0.0)) throw ValidationError("constrained_optimize: tau must be positive");
  }
  if (!(budget.intensity > 0.0)) {
    throw InfeasibleBudget("constrained_optimize: zero intensity drives nothing");
  }

  const auto rule = search.mirror.quadrature.standard_rule();
  const auto& sim = search.mirror.simulation;
  ConstrainedResult out;
  auto fidelity = [&](double om, double tau) {
    GaussianPulse p;
    p.amplitude = om;
    p.duration = tau;
    ++out.evaluations;
    return mirror_fidelity(cloud, p, rule, sim);
  };
  auto clamp_at = [&](double tau) -> std::optional<double> {
    try {
      return omega_max(budget.intensity, tau, budget.max_loss, budget.transition);
    } catch (const InfeasibleBudget&) {
      return std::nullopt;
    }
  };

  const auto [free_lo, free_hi] =
      mirror_omega_range(cloud.bragg_order, std::nullopt, search.mirror);
  double best_f = -1.0;
  double best_om = 0.0;
  double best_tau = 0.0;
  for (double tau : tau_grid) {
    ConstrainedPoint pt;
    pt.tau = tau;
    const auto cap = clamp_at(tau);
    if (cap) {
      pt.feasible = true;
      pt.omega_max = *cap;
      const double hi = std::min(free_hi, *cap);
      const double lo = std::min(free_lo, 0.25 * hi);
      const double ulo = std::log(lo);
      const double uhi = std::log(hi);
      double f0 = -1.0;
      double u0 = uhi;
      for (int i = 0; i < search.omega_points; ++i) {
        const double u =
            search.omega_points == 1 ? uhi : ulo + (uhi - ulo) * i / (search.omega_points - 1);
        const double f = fidelity(std::exp(u), tau);
        if (f > f0) {
          f0 = f;
          u0 = u;
        }
      }
      NelderMeadOptions nm;
      nm.max_evaluations = search.max_evaluations;
      nm.x_tolerance = 1e-4;
      nm.f_tolerance = 1e-8;
      const double du = search.omega_points > 1 ? (uhi - ulo) / (search.omega_points - 1) : 0.1;
      nm.initial_step = {du > 0.0 ? 0.5 * du : 0.05};
      auto res = nelder_mead(
          [&](const std::vector<double>& x) { return -fidelity(std::exp(x[0]), tau); }, {u0},
          {ulo}, {uhi}, nm);
      if (-res.f >= f0) {
        pt.omega_opt = std::exp(res.x[0]);
        pt.fidelity = -res.f;
      } else {
        pt.omega_opt = std::exp(u0);
        pt.fidelity = f0;
      }
      if (pt.fidelity > best_f) {
        best_f = pt.fidelity;
        best_om = pt.omega_opt;
        best_tau = tau;
      }
    }
    out.scan.push_back(pt);
  }
  if (best_f < 0.0) {
    throw InfeasibleBudget("constrained_optimize: the loss budget is infeasible for every tau");
  }

  // Joint polish over (log Omega, log tau), Omega projected onto the clamp.
  const auto [tau_lo_it, tau_hi_it] = std::minmax_element(tau_grid.begin(), tau_grid.end());
  if (*tau_hi_it > *tau_lo_it) {
    auto clamp_omega = [&](double u, double v) -> std::optional<double> {
      const auto cap = clamp_at(std::exp(v));
      if (!cap) return std::nullopt;
      return std::min({std::exp(u), *cap, free_hi});
    };
    NelderMeadOptions nm;
    nm.max_evaluations = search.max_evaluations;
    nm.x_tolerance = 1e-4;
    nm.f_tolerance = 1e-8;
    nm.initial_step = {0.05, 0.05};
    auto res = nelder_mead(
        [&](const std::vector<double>& x) {
          const auto om = clamp_omega(x[0], x[1]);
          return om ? -fidelity(*om, std::exp(x[1])) : 1.0;
        },
        {std::log(best_om), std::log(best_tau)},
        {std::log(std::min(free_lo, 0.25 * best_om)), std::log(*tau_lo_it)},
        {std::log(free_hi), std::log(*tau_hi_it)}, nm);
    if (-res.f > best_f) {
      best_f = -res.f;
      best_om = *clamp_omega(res.x[0], res.x[1]);
      best_tau = std::exp(res.x[1]);
    }
  }

  out.omega_opt = best_om;
  out.tau_opt = best_tau;
  out.fidelity = best_f;
  out.omega_max = *clamp_at(best_tau);
  out.at_clamp = best_om >= out.omega_max * (1.0 - 1e-6);
  out.detuning = detuning(best_om, budget.intensity, budget.transition);
  GaussianPulse p;
  p.amplitude = best_om;
  p.duration = best_tau;
  out.loss = scattering_loss(p, budget);
  return out;
}

}  // namespace braggkit
