#include "braggkit/mirror.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "braggkit/error.hpp"
#include "braggkit/optimize.hpp"
#include "braggkit/parallel.hpp"
#include "braggkit/two_level.hpp"

namespace braggkit {

void FidelityQuadrature::validate() const {
  if (nodes < 1) throw ValidationError("quadrature: nodes must be >= 1");
  if (!(cutoff > 0.0)) throw ValidationError("quadrature: cutoff must be positive");
  if (fallback_panels < 1 || fallback_points < 1) {
    throw ValidationError("quadrature: fallback rule needs panels and points");
  }
}

QuadratureRule FidelityQuadrature::standard_rule() const {
  validate();
  return gauss_hermite_normal(nodes);
}

QuadratureRule FidelityQuadrature::refined_rule() const {
  validate();
  return gauss_hermite_normal(nodes + kQuadratureRefinement);
}

QuadratureRule FidelityQuadrature::fallback_rule() const {
  validate();
  return normal_legendre(fallback_panels, fallback_points, cutoff);
}

Ladder pulse_ladder(int bragg_order, double delta, const GaussianPulse& pulse,
                    const SimulationOptions& sim) {
  return Ladder(bragg_order, working_order(bragg_order, pulse.amplitude, sim.strong_drive_margin),
                delta);
}

double transfer_probability(int bragg_order, double delta, const GaussianPulse& pulse,
                            const SimulationOptions& sim) {
  const Ladder ladder = pulse_ladder(bragg_order, delta, pulse, sim);
  const auto col = pulse_propagator_column(ladder, pulse, -bragg_order, sim.evolve);
  return std::norm(col[*ladder.index_of(bragg_order)]);
}

namespace {

// Index of the node mirrored through zero, when the rule has one.
std::optional<std::size_t> mirrored(const QuadratureRule& rule, std::size_t i) {
  const std::size_t j = rule.nodes.size() - 1 - i;
  const double scale = std::max(1.0, std::abs(rule.nodes[i]));
  if (std::abs(rule.nodes[i] + rule.nodes[j]) <= 1e-12 * scale) return j;
  return std::nullopt;
}

}  // namespace

MirrorPopulations mirror_populations(const CloudSpec& cloud, const GaussianPulse& pulse,
                                     const QuadratureRule& standard_rule,
                                     const SimulationOptions& sim) {
  cloud.validate();
  pulse.validate();
  const int n = cloud.bragg_order;
  const auto pops = parallel_map(
      standard_rule.nodes.size(),
      [&](std::size_t i) {
        const Ladder ladder =
            pulse_ladder(n, cloud.momentum_width * standard_rule.nodes[i], pulse, sim);
        const auto col = pulse_propagator_column(ladder, pulse, -n, sim.evolve);
        return std::pair{std::norm(col[*ladder.index_of(n)]),
                         std::norm(col[*ladder.index_of(-n)])};
      },
      sim.threads);
  MirrorPopulations out;
  for (std::size_t i = 0; i < pops.size(); ++i) {
    out.target += standard_rule.weights[i] * pops[i].first;
    out.initial += standard_rule.weights[i] * pops[i].second;
  }
  return out;
}

double mirror_fidelity(const CloudSpec& cloud, const GaussianPulse& pulse,
                       const QuadratureRule& standard_rule, const SimulationOptions& sim) {
  cloud.validate();
  pulse.validate();
  const std::size_t count = standard_rule.nodes.size();
  // Integrate only nodes with xi >= 0 when the partner exists.
  std::vector<std::size_t> work;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = mirrored(standard_rule, i);
    if (!j || standard_rule.nodes[i] >= 0.0) work.push_back(i);
  }
  const auto values = parallel_map(
      work.size(),
      [&](std::size_t k) {
        return transfer_probability(cloud.bragg_order,
                                    cloud.momentum_width * standard_rule.nodes[work[k]], pulse,
                                    sim);
      },
      sim.threads);
  std::vector<double> p(count, 0.0);
  for (std::size_t k = 0; k < work.size(); ++k) p[work[k]] = values[k];
  for (std::size_t i = 0; i < count; ++i) {
    if (standard_rule.nodes[i] < 0.0) {
      if (const auto j = mirrored(standard_rule, i)) p[i] = p[*j];
    }
  }
  double f = 0.0;
  for (std::size_t i = 0; i < count; ++i) f += standard_rule.weights[i] * p[i];
  return std::clamp(f, 0.0, 1.0);
}

double mirror_fidelity(const CloudSpec& cloud, const GaussianPulse& pulse,
                       const FidelityQuadrature& quad, const SimulationOptions& sim) {
  return mirror_fidelity(cloud, pulse, quad.standard_rule(), sim);
}

void MirrorSearch::validate() const {
  if (omega_points < 1 || tau_points < 1) throw ValidationError("mirror search: empty grid");
  if (max_evaluations < 1) throw ValidationError("mirror search: max_evaluations must be >= 1");
  if (!(tau_min > 0.0) || !(tau_cap > tau_min)) {
    throw ValidationError("mirror search: need 0 < tau_min < tau_cap");
  }
  if (!(clamped_cycle_factor >= 1.0)) {
    throw ValidationError("mirror search: clamped_cycle_factor must be >= 1");
  }
  if (!(tie_tolerance >= 0.0)) throw ValidationError("mirror search: negative tie tolerance");
  if (omega_lower && !(*omega_lower > 0.0)) {
    throw ValidationError("mirror search: omega_lower must be positive");
  }
  if (omega_lower && omega_upper && !(*omega_upper >= *omega_lower)) {
    throw ValidationError("mirror search: omega_upper below omega_lower");
  }
  quadrature.validate();
}

std::pair<double, double> mirror_omega_range(int bragg_order, std::optional<double> omega_max,
                                             const MirrorSearch& search) {
  const double n2 = static_cast<double>(bragg_order) * bragg_order;
  double lo = search.omega_lower.value_or(std::max(0.5, 0.25 * n2));
  double hi = search.omega_upper.value_or(6.0 * n2 + 10.0);
  if (omega_max) {
    if (!(*omega_max > 0.0)) throw ValidationError("clamp must be positive");
    hi = std::min(hi, *omega_max);
    lo = std::min(lo, 0.25 * hi);
  }
  return {lo, hi};
}

double first_rabi_cycle(int bragg_order, double omega, double tau_min, double tau_cap,
                        const SimulationOptions& sim) {
  if (!(omega > 0.0) || !(tau_min > 0.0) || !(tau_cap > tau_min)) {
    throw ValidationError("first_rabi_cycle: need omega > 0 and 0 < tau_min < tau_cap");
  }
  // The two-level area estimate places the pi time; start well below it.
  const double omega_eff = effective_rabi(omega, bragg_order);
  const double tau_pi = std::sqrt(std::numbers::pi * bragg_order / 2.0) / omega_eff;
  double tau = std::max(tau_min, 0.25 * tau_pi);
  if (!(tau < tau_cap)) return tau_cap;

  auto transfer = [&](double t) {
    GaussianPulse p;
    p.amplitude = omega;
    p.duration = t;
    return transfer_probability(bragg_order, 0.0, p, sim);
  };
  double prev = transfer(tau);
  if (prev > 0.5 && tau > tau_min) {
    tau = tau_min;
    prev = transfer(tau);
  }
  constexpr double kRatio = 1.1;
  constexpr double kPeakFloor = 0.2;
  bool past_peak = false;
  while (true) {
    const double next = tau * kRatio;
    if (next >= tau_cap) return tau_cap;
    const double cur = transfer(next);
    if (!past_peak) {
      if (cur < prev && prev > kPeakFloor) past_peak = true;
    } else if (cur > prev) {
      return tau;
    }
    prev = cur;
    tau = next;
  }
}

namespace {

struct Sample {
  double omega;
  double tau;
  double f;
};

// tau_hi(Omega) as piecewise-linear in (log Omega, log tau), flat outside.
class CycleBound {
 public:
  CycleBound(std::vector<double> log_omega, std::vector<double> log_tau)
      : x_(std::move(log_omega)), y_(std::move(log_tau)) {}

  double log_tau_hi(double log_omega) const {
    if (x_.size() == 1 || log_omega <= x_.front()) return y_.front();
    if (log_omega >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), log_omega);
    const std::size_t k = static_cast<std::size_t>(it - x_.begin());
    const double t = (log_omega - x_[k - 1]) / (x_[k] - x_[k - 1]);
    return y_[k - 1] + t * (y_[k] - y_[k - 1]);
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

std::vector<double> geometric(double lo, double hi, int points) {
  std::vector<double> out;
  if (points == 1 || hi <= lo) return {hi};
  for (int i = 0; i < points; ++i) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  }
  return out;
}

}  // namespace

OptimizationResult optimize_mirror(const CloudSpec& cloud, std::optional<double> omega_max,
                                   const MirrorSearch& search) {
  cloud.validate();
  search.validate();
  const int n = cloud.bragg_order;
  const auto [omega_lo, omega_hi] = mirror_omega_range(n, omega_max, search);
  const auto omega_grid = geometric(omega_lo, omega_hi, search.omega_points);
  const double cycle_factor = omega_max ? search.clamped_cycle_factor : 1.0;
  const double log_tau_min = std::log(search.tau_min);

  std::vector<double> log_omega;
  std::vector<double> log_tau_hi;
  for (double om : omega_grid) {
    const double hi =
        first_rabi_cycle(n, om, search.tau_min, search.tau_cap, search.simulation);
    log_omega.push_back(std::log(om));
    log_tau_hi.push_back(
        std::log(std::clamp(cycle_factor * hi, 1.5 * search.tau_min, search.tau_cap)));
  }
  const CycleBound bound(log_omega, log_tau_hi);

  const QuadratureRule rule = search.quadrature.standard_rule();
  std::vector<Sample> history;
  auto evaluate = [&](double om, double tau) {
    GaussianPulse p;
    p.amplitude = om;
    p.duration = tau;
    const double f = mirror_fidelity(cloud, p, rule, search.simulation);
    history.push_back({om, tau, f});
    return f;
  };
  auto tau_of = [&](double u, double s) {
    return std::exp(log_tau_min + s * (bound.log_tau_hi(u) - log_tau_min));
  };

  // Seed grid.
  double best_f = -1.0;
  std::vector<double> best_x{std::log(omega_grid.front()), 1.0};
  auto consider = [&](double u, double s) {
    const double f = evaluate(std::exp(u), tau_of(u, s));
    if (f > best_f) {
      best_f = f;
      best_x = {u, s};
    }
  };
  for (double om : omega_grid) {
    for (int j = 0; j < search.tau_points; ++j) {
      consider(std::log(om), static_cast<double>(j + 1) / search.tau_points);
    }
  }
  const double u_lo = std::log(omega_lo);
  const double u_hi = std::log(omega_hi);
  for (const auto& [om, tau] : search.seeds) {
    if (!(om > 0.0) || !(tau > 0.0)) continue;
    const double u = std::clamp(std::log(om), u_lo, u_hi);
    const double span = bound.log_tau_hi(u) - log_tau_min;
    const double s = std::clamp((std::log(tau) - log_tau_min) / span, 0.0, 1.0);
    consider(u, s);
  }

  // Local refinement.
  NelderMeadOptions nm;
  nm.max_evaluations = search.max_evaluations;
  nm.x_tolerance = 1e-4;
  nm.f_tolerance = 1e-8;
  const double du = omega_grid.size() > 1 ? (u_hi - u_lo) / (omega_grid.size() - 1) : 0.1;
  nm.initial_step = {du > 0.0 ? 0.5 * du : 0.1, 0.5 / search.tau_points};
  const auto refined = nelder_mead(
      [&](const std::vector<double>& x) { return -evaluate(std::exp(x[0]), tau_of(x[0], x[1])); },
      best_x, {u_lo, 0.0}, {u_hi, 1.0}, nm);

  double top = -1.0;
  for (const auto& h : history) top = std::max(top, h.f);
  const Sample* pick = nullptr;
  for (const auto& h : history) {
    if (h.f < top - search.tie_tolerance) continue;
    if (!pick || h.omega < pick->omega || (h.omega == pick->omega && h.f > pick->f)) pick = &h;
  }

  OptimizationResult r;
  r.omega_opt = pick->omega;
  r.tau_opt = pick->tau;
  r.objective = pick->f;
  r.clamped = omega_max.has_value();
  r.at_clamp = omega_max && pick->omega >= *omega_max * (1.0 - 1e-6);
  r.evaluations = static_cast<int>(history.size());
  r.converged = refined.converged;

  GaussianPulse p;
  p.amplitude = r.omega_opt;
  p.duration = r.tau_opt;
  const double check = mirror_fidelity(cloud, p, search.quadrature.refined_rule(), search.simulation);
  if (std::abs(check - r.objective) > kQuadratureTolerance) {
    r.quadrature_converged = false;
    r.objective = mirror_fidelity(cloud, p, search.quadrature.fallback_rule(), search.simulation);
  }
  return r;
}

double sequential_fidelity(double single_pulse_fidelity, int repetitions) {
  if (!(single_pulse_fidelity >= 0.0 && single_pulse_fidelity <= 1.0)) {
    throw ValidationError("sequential_fidelity: fidelity must lie in [0, 1]");
  }
  if (repetitions < 1) throw ValidationError("sequential_fidelity: repetitions must be >= 1");
  return std::pow(single_pulse_fidelity, repetitions);
}

CuspScan cusp_scan(int bragg_order, const std::vector<double>& sigma_grid,
                   std::optional<double> omega_max, const MirrorSearch& search, double threshold) {
  if (sigma_grid.empty()) throw ValidationError("cusp_scan: empty sigma grid");
  if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end())) {
    throw ValidationError("cusp_scan: sigma grid must be ascending");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("cusp_scan: threshold must lie in (0, 1)");
  }
  CuspScan scan;
  scan.bragg_order = bragg_order;
  MirrorSearch local = search;
  for (double sigma : sigma_grid) {
    CloudSpec cloud;
    cloud.bragg_order = bragg_order;
    cloud.momentum_width = sigma;
    CuspRow row;
    row.sigma = sigma;
    row.optimum = optimize_mirror(cloud, omega_max, local);
    GaussianPulse p;
    p.amplitude = row.optimum.omega_opt;
    p.duration = row.optimum.tau_opt;
    row.off_order_loss = std::max(
        0.0, mirror_populations(cloud, p, search.quadrature.standard_rule(), search.simulation)
                 .off_order());
    if (!scan.sigma_cusp && sigma_grid.size() > 1 && row.off_order_loss > threshold) {
      row.cusp = true;
      scan.sigma_cusp = sigma;
    }
    local.seeds = search.seeds;
    local.seeds.emplace_back(row.optimum.omega_opt, row.optimum.tau_opt);
    scan.rows.push_back(row);
  }
  return scan;
}

}  // namespace braggkit
