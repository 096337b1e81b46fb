#include "braggkit/mz.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

#include "braggkit/dephasing.hpp"
#include "braggkit/error.hpp"
#include "braggkit/optimize.hpp"
#include "braggkit/parallel.hpp"

namespace braggkit {

namespace {

using Column = std::vector<Complex>;

// Half-width of the ladder shared by all pulses of a sequence.
int common_order(int n, const std::vector<GaussianPulse>& pulses, const SimulationOptions& sim) {
  int m = n;
  for (const auto& p : pulses) m = std::max(m, working_order(n, p.amplitude, sim.strong_drive_margin));
  return m;
}

double half_window(const GaussianPulse& p) { return 0.5 * (p.window_end() - p.window_start()); }

// Partner node mirrored through zero.
std::optional<std::size_t> partner(const std::vector<double>& deltas, std::size_t i) {
  const std::size_t j = deltas.size() - 1 - i;
  const double scale = std::max(1e-300, std::max(std::abs(deltas[i]), std::abs(deltas[j])));
  if (deltas[i] == 0.0 && deltas[j] == 0.0) return j;
  if (std::abs(deltas[i] + deltas[j]) <= 1e-12 * scale) return j;
  return std::nullopt;
}

// Centred kernel column `m` of a pulse, computed on the pulse's own ladder and
// embedded in the common ladder of half-width `order`.
Column centred_column(int n, int order, double delta, const GaussianPulse& pulse, int m,
                      const SimulationOptions& sim) {
  const Ladder own = pulse_ladder(n, delta, pulse, sim);
  const int shift = (order - own.max_order) / 2;
  if (!own.index_of(m)) {
    // Outside the pulse's own ladder the order is left uncoupled.
    Column unit(order + 1, Complex{});
    unit[(m + order) / 2] = 1.0;
    return unit;
  }
  const auto w = pulse_propagator_column(own, pulse, m, sim.evolve);
  const double h = half_window(pulse);
  const int c = *own.index_of(m);
  const Complex right = std::polar(1.0, own.energy(c) * h);
  Column out(order + 1, Complex{});
  for (int r = 0; r < own.size(); ++r) {
    out[r + shift] = std::polar(1.0, own.energy(r) * h) * w[r] * right;
  }
  return out;
}

Column reversed(const Column& c) { return Column(c.rbegin(), c.rend()); }

struct EdgeColumns {
  std::vector<Column> minus;  // K[:, -n] per node
  std::vector<Column> plus;   // K[:, +n] per node
};

// K is symmetric for a real time-symmetric pulse and K(-delta) is K(delta)
// with the order of the ladder reversed, so K[:, +n](delta) is the reversed
// K[:, -n](-delta). One integration per node covers both edge columns.
EdgeColumns edge_columns(int n, int order, const GaussianPulse& pulse,
                         const std::vector<double>& deltas, const SimulationOptions& sim) {
  const std::size_t count = deltas.size();
  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t i = 0; i < count; ++i) jobs.emplace_back(i, -n);
  for (std::size_t i = 0; i < count; ++i) {
    if (!partner(deltas, i)) jobs.emplace_back(i, n);
  }
  auto cols = parallel_map(
      jobs.size(),
      [&](std::size_t k) {
        return centred_column(n, order, deltas[jobs[k].first], pulse, jobs[k].second, sim);
      },
      sim.threads);
  EdgeColumns out;
  out.minus.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(count));
  out.plus.resize(count);
  std::size_t extra = count;
  for (std::size_t i = 0; i < count; ++i) {
    if (const auto j = partner(deltas, i)) {
      out.plus[i] = reversed(out.minus[*j]);
    } else {
      out.plus[i] = std::move(cols[extra++]);
    }
  }
  return out;
}

// Middle-pulse kernels per node, built column by column on demand. The kernel
// is symmetric, so each column also supplies the matching row; an entry stays
// zero only when neither its row nor its column was requested.
class MiddleKernels {
 public:
  MiddleKernels(int n, int order, const GaussianPulse& pulse, std::vector<double> deltas,
                const SimulationOptions& sim)
      : n_(n), order_(order), pulse_(pulse), deltas_(std::move(deltas)), sim_(sim),
        known_(order + 1, false) {
    for (std::size_t i = 0; i < deltas_.size(); ++i) {
      ComplexMatrix m(order + 1);
      mats_.push_back(std::move(m));
    }
  }

  // Adds every column whose order carries more than `threshold` amplitude in
  // any of the given per-node vectors. The request is mirrored in m so that
  // partner nodes can share integrations.
  void require(const std::vector<const std::vector<Column>*>& edges, double threshold) {
    const int size = order_ + 1;
    std::vector<int> wanted;
    for (int a = 0; a < size; ++a) {
      if (known_[a]) continue;
      bool need = false;
      for (const auto* e : edges) {
        for (const auto& col : *e) {
          if (std::abs(col[a]) > threshold || std::abs(col[size - 1 - a]) > threshold) {
            need = true;
            break;
          }
        }
        if (need) break;
      }
      if (need) wanted.push_back(a);
    }
    if (wanted.empty()) return;

    std::vector<std::pair<std::size_t, int>> jobs;
    for (std::size_t i = 0; i < deltas_.size(); ++i) {
      const auto j = partner(deltas_, i);
      if (j && *j < i) continue;
      for (int a : wanted) jobs.emplace_back(i, a);
    }
    auto cols = parallel_map(
        jobs.size(),
        [&](std::size_t k) {
          const int m = -order_ + 2 * jobs[k].second;
          return centred_column(n_, order_, deltas_[jobs[k].first], pulse_, m, sim_);
        },
        sim_.threads);
    for (std::size_t k = 0; k < jobs.size(); ++k) {
      const auto [i, a] = jobs[k];
      store(i, a, cols[k]);
      const auto j = partner(deltas_, i);
      if (j && *j != i) store(*j, size - 1 - a, reversed(cols[k]));
    }
    for (int a : wanted) known_[a] = true;
  }

  const ComplexMatrix& at(std::size_t node) const { return mats_[node]; }

 private:
  void store(std::size_t node, int a, const Column& col) {
    auto& m = mats_[node];
    for (int r = 0; r < m.dim; ++r) {
      m(r, a) = col[r];
      m(a, r) = col[r];
    }
  }

  int n_;
  int order_;
  GaussianPulse pulse_;
  std::vector<double> deltas_;
  SimulationOptions sim_;
  std::vector<bool> known_;
  std::vector<ComplexMatrix> mats_;
};

// Amplitude below which an order of the outer pulses does not request a
// middle-kernel column; skipped paths carry less than its square.
inline constexpr double kMiddleColumnThreshold = 1e-6;

// Per-node kernels of a three-pulse sequence on a common ladder.
struct SequenceKernels {
  int n = 1;
  int order = 1;
  std::vector<Column> first;        // K1[:, -n]
  std::shared_ptr<MiddleKernels> middle;
  std::vector<Column> last_minus;   // K3[-n, :] (= K3[:, -n])
  std::vector<Column> last_plus;    // K3[+n, :]
  double phase1 = 0.0;
  double phase2 = 0.0;
  double phase3 = 0.0;
};

bool same_pulse(const GaussianPulse& a, const GaussianPulse& b) {
  return a.amplitude == b.amplitude && a.duration == b.duration && a.shape == b.shape;
}

// Sector amplitudes Y[p][S] at one node for populations p in {-n, +n}.
// S indexes a + b from -2 order to 2 order in steps of 2.
void sector_amplitudes(const SequenceKernels& k, std::size_t node, double interrogation_time,
                       double phi3, std::vector<Complex>& y_minus, std::vector<Complex>& y_plus) {
  const int size = k.order + 1;
  const int sectors = 2 * size - 1;
  y_minus.assign(sectors, Complex{});
  y_plus.assign(sectors, Complex{});
  auto m_of = [&](int idx) { return -k.order + 2 * idx; };
  const auto& v = k.first[node];
  const auto& mid = k.middle->at(node);
  for (int b = 0; b < size; ++b) {
    const int mb = m_of(b);
    const Complex out_phase = std::polar(1.0, 0.5 * mb * (phi3 - k.phase2));
    const Complex wm = k.last_minus[node][b] * out_phase;
    const Complex wp = k.last_plus[node][b] * out_phase;
    if (wm == 0.0 && wp == 0.0) continue;
    for (int a = 0; a < size; ++a) {
      if (v[a] == 0.0) continue;
      const int ma = m_of(a);
      const double e = static_cast<double>(ma) * ma + static_cast<double>(mb) * mb;
      const Complex in_phase = std::polar(1.0, 0.5 * ma * (k.phase2 - k.phase1) - e * interrogation_time);
      const Complex path = mid(b, a) * v[a] * in_phase;
      y_minus[a + b] += wm * path;
      y_plus[a + b] += wp * path;
    }
  }
}

std::pair<double, double> averaged_populations(const SequenceKernels& k,
                                               const QuadratureRule& standard_rule, double sigma,
                                               double interrogation_time, double phi3) {
  const std::size_t count = standard_rule.nodes.size();
  const int sectors = 2 * (k.order + 1) - 1;
  std::vector<double> rates(sectors);
  for (int s = 0; s < sectors; ++s) {
    const double total = -2.0 * k.order + 2.0 * s;  // a + b
    rates[s] = -2.0 * sigma * interrogation_time * total;
  }
  std::vector<std::vector<Complex>> ym(count), yp(count);
  for (std::size_t i = 0; i < count; ++i) {
    sector_amplitudes(k, i, interrogation_time, phi3, ym[i], yp[i]);
  }
  return {dephased_average(standard_rule, ym, rates), dephased_average(standard_rule, yp, rates)};
}

struct Sequence3 {
  GaussianPulse first;
  GaussianPulse middle;
  GaussianPulse last;
  double interrogation_time;
};

Sequence3 split_sequence(const PulseSequence& seq) {
  seq.validate();
  if (seq.pulses.size() != 3) throw ValidationError("mz: sequence must have exactly three pulses");
  const auto& p = seq.pulses;
  const double t1 = p[1].center - p[0].center;
  const double t2 = p[2].center - p[1].center;
  if (!(t1 > 0.0) || std::abs(t1 - t2) > 1e-9 * std::max(1.0, t1)) {
    throw ValidationError("mz: pulse centres must be equally spaced and increasing");
  }
  if (half_window(p[0]) + half_window(p[1]) > t1 || half_window(p[1]) + half_window(p[2]) > t1) {
    throw ValidationError("mz: pulse windows overlap");
  }
  return {p[0], p[1], p[2], t1};
}

SequenceKernels build_kernels(int n, const Sequence3& s, const std::vector<double>& deltas,
                              const SimulationOptions& sim) {
  SequenceKernels k;
  k.n = n;
  k.order = common_order(n, {s.first, s.middle, s.last}, sim);
  k.phase1 = s.first.phase;
  k.phase2 = s.middle.phase;
  k.phase3 = s.last.phase;
  auto e1 = edge_columns(n, k.order, s.first, deltas, sim);
  k.first = std::move(e1.minus);
  if (same_pulse(s.first, s.last)) {
    k.last_minus = k.first;
    k.last_plus = std::move(e1.plus);
  } else {
    auto e3 = edge_columns(n, k.order, s.last, deltas, sim);
    k.last_minus = std::move(e3.minus);
    k.last_plus = std::move(e3.plus);
  }
  k.middle = std::make_shared<MiddleKernels>(n, k.order, s.middle, deltas, sim);
  k.middle->require({&k.first, &k.last_minus, &k.last_plus}, kMiddleColumnThreshold);
  return k;
}

std::vector<double> node_deltas(const QuadratureRule& rule, double sigma) {
  std::vector<double> d;
  for (double x : rule.nodes) d.push_back(sigma * x);
  return d;
}

}  // namespace

FringeScan mz_fringe(int bragg_order, double sigma, const PulseSequence& seq,
                     const std::vector<double>& phi_grid, const QuadratureRule& standard_rule,
                     const SimulationOptions& sim) {
  if (bragg_order < 1) throw ValidationError("mz: bragg_order must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("mz: sigma must be >= 0");
  if (phi_grid.empty()) throw ValidationError("mz: empty phase grid");
  const Sequence3 s = split_sequence(seq);
  const auto k = build_kernels(bragg_order, s, node_deltas(standard_rule, sigma), sim);
  return make_fringe_scan(bragg_order, phi_grid, [&](double phi) {
    return averaged_populations(k, standard_rule, sigma, s.interrogation_time, s.last.phase + phi);
  });
}

FringeScan mz_fringe(const CloudSpec& cloud, const PulseSequence& seq,
                     const std::vector<double>& phi_grid, const FidelityQuadrature& quad,
                     const SimulationOptions& sim) {
  cloud.validate();
  return mz_fringe(cloud.bragg_order, cloud.momentum_width, seq, phi_grid, quad.standard_rule(),
                   sim);
}

std::pair<double, double> mz_node_populations(int bragg_order, double delta,
                                              const PulseSequence& seq,
                                              const SimulationOptions& sim) {
  const Sequence3 s = split_sequence(seq);
  const auto k = build_kernels(bragg_order, s, {delta}, sim);
  // A single node carries every path coherently; apply the node's own
  // gap phases directly.
  const int size = k.order + 1;
  const int sectors = 2 * size - 1;
  std::vector<Complex> ym, yp;
  sector_amplitudes(k, 0, s.interrogation_time, s.last.phase, ym, yp);
  Complex am{}, ap{};
  for (int q = 0; q < sectors; ++q) {
    const double total = -2.0 * k.order + 2.0 * q;
    const Complex ph = std::polar(1.0, -2.0 * delta * s.interrogation_time * total);
    am += ym[q] * ph;
    ap += yp[q] * ph;
  }
  return {std::norm(am), std::norm(ap)};
}

void MzSearch::validate() const {
  if (interrogation_times.empty()) throw ValidationError("mz search: need interrogation times");
  for (double t : interrogation_times) {
    if (!(t > 0.0)) throw ValidationError("mz search: interrogation times must be positive");
  }
  if (!(min_time_ratio >= 20.0)) {
    throw ValidationError("mz search: min_time_ratio must be >= 20");
  }
  if (omega_points < 1 || tau_points < 1) throw ValidationError("mz search: empty grid");
  if (!(omega_span >= 1.0)) throw ValidationError("mz search: omega_span must be >= 1");
  if (!(tau_lower > 0.0 && tau_upper >= tau_lower)) {
    throw ValidationError("mz search: need 0 < tau_lower <= tau_upper");
  }
  if (max_evaluations < 1 || joint_evaluations < 1) {
    throw ValidationError("mz search: evaluation budgets must be >= 1");
  }
  if (phi_points < 5) throw ValidationError("mz search: phi_points must be >= 5");
  mirror.validate();
}

std::vector<double> scaled_interrogation_times(const MzSearch& search, double longest_tau) {
  std::vector<double> times = search.interrogation_times;
  std::sort(times.begin(), times.end());
  const double needed = search.min_time_ratio * longest_tau;
  if (times.front() < needed) {
    const double scale = needed / times.front();
    for (double& t : times) t *= scale;
  }
  return times;
}

std::pair<double, double> extrapolate_infinite_time(const std::vector<double>& times,
                                                    const std::vector<double>& g) {
  if (times.size() != g.size() || times.empty()) {
    throw ValidationError("extrapolate: need matching, non-empty series");
  }
  if (times.size() == 1) return {g.front(), 0.0};
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double k = static_cast<double>(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double x = 1.0 / times[i];
    sx += x;
    sy += g[i];
    sxx += x * x;
    sxy += x * g[i];
  }
  const double den = k * sxx - sx * sx;
  const double slope = den != 0.0 ? (k * sxy - sx * sy) / den : 0.0;
  const double intercept = (sy - slope * sx) / k;
  double spread = 0.0;
  if (times.size() == 2) {
    spread = std::abs(g[1] - g[0]);
  } else {
    for (std::size_t i = 0; i < times.size(); ++i) {
      spread = std::max(spread, std::abs(g[i] - (intercept + slope / times[i])));
    }
  }
  return {std::clamp(intercept, 0.0, 1.0), spread};
}

namespace {

// Beamsplitter candidates against a frozen mirror: kernels of the mirror are
// computed once, each candidate costs one integration per node.
class MzEvaluator {
 public:
  MzEvaluator(int n, double sigma, const GaussianPulse& mirror, double omega_bs_max,
              const QuadratureRule& rule, std::vector<double> times, int phi_points,
              const SimulationOptions& sim)
      : n_(n),
        sigma_(sigma),
        rule_(rule),
        times_(std::move(times)),
        phi_(default_phi_grid(n, phi_points)),
        sim_(sim),
        deltas_(node_deltas(rule, sigma)) {
    GaussianPulse widest = mirror;
    widest.amplitude = std::max(mirror.amplitude, omega_bs_max);
    order_ = common_order(n, {mirror, widest}, sim);
    middle_ = std::make_shared<MiddleKernels>(n, order_, mirror, deltas_, sim);
  }

  std::vector<GFactor> evaluate(double omega_bs, double tau_bs) {
    ++evaluations_;
    GaussianPulse bs;
    bs.amplitude = omega_bs;
    bs.duration = tau_bs;
    auto e = edge_columns(n_, order_, bs, deltas_, sim_);
    SequenceKernels k;
    k.n = n_;
    k.order = order_;
    k.first = e.minus;
    k.last_minus = std::move(e.minus);
    k.last_plus = std::move(e.plus);
    middle_->require({&k.first, &k.last_plus}, kMiddleColumnThreshold);
    k.middle = middle_;
    std::vector<GFactor> out;
    for (double t : times_) {
      const auto scan = make_fringe_scan(n_, phi_, [&](double phi) {
        return averaged_populations(k, rule_, sigma_, t, phi);
      });
      out.push_back(g_factor(scan));
    }
    return out;
  }

  const std::vector<double>& times() const { return times_; }
  int evaluations() const { return evaluations_; }

 private:
  int n_;
  double sigma_;
  QuadratureRule rule_;
  std::vector<double> times_;
  std::vector<double> phi_;
  SimulationOptions sim_;
  std::vector<double> deltas_;
  int order_ = 0;
  std::shared_ptr<MiddleKernels> middle_;
  int evaluations_ = 0;
};

// Refinement stops once the simplex spans under 0.5% in Omega and tau and
// its G values agree to 1e-6.
inline constexpr double kMzLogTolerance = 5e-3;
inline constexpr double kMzGTolerance = 1e-6;

QuadratureRule mz_rule(double sigma, const MzSearch& search) {
  return sigma > 0.0 ? search.mirror.quadrature.standard_rule() : gauss_hermite_normal(1);
}

// The momentum average for sigma = 0 degenerates to the resonant atom.
CloudSpec mirror_cloud(int n, double sigma) {
  CloudSpec c;
  c.bragg_order = n;
  c.momentum_width = sigma > 0.0 ? sigma : 1e-12;
  return c;
}

MzResult optimize_mz_impl(int n, double sigma, std::optional<double> omega_max,
                          const MzSearch& search) {
  search.validate();
  MzResult out;
  out.clamped = omega_max.has_value();

  MirrorSearch ms = search.mirror;
  if (sigma == 0.0) ms.quadrature.nodes = 1;
  out.mirror = optimize_mirror(mirror_cloud(n, sigma), omega_max, ms);

  double om_lo = out.mirror.omega_opt / search.omega_span;
  double om_hi = out.mirror.omega_opt * search.omega_span;
  if (omega_max) {
    om_hi = std::min(om_hi, *omega_max);
    om_lo = std::min(om_lo, om_hi);
  }
  const double tau_lo = out.mirror.tau_opt * search.tau_lower;
  const double tau_hi = out.mirror.tau_opt * search.tau_upper;

  GaussianPulse mirror;
  mirror.amplitude = out.mirror.omega_opt;
  mirror.duration = out.mirror.tau_opt;
  const auto times =
      scaled_interrogation_times(search, std::max(tau_hi, out.mirror.tau_opt));
  MzEvaluator eval(n, sigma, mirror, om_hi, mz_rule(sigma, search), times, search.phi_points,
                   search.mirror.simulation);

  struct Candidate {
    double u, v;
    std::vector<GFactor> g;
  };
  std::vector<Candidate> seen;
  auto run = [&](double u, double v) -> const Candidate& {
    for (const auto& c : seen) {
      if (c.u == u && c.v == v) return c;
    }
    seen.push_back({u, v, eval.evaluate(std::exp(u), std::exp(v))});
    return seen.back();
  };  // the reference is only read before the next call

  const double ulo = std::log(om_lo), uhi = std::log(om_hi);
  const double vlo = std::log(tau_lo), vhi = std::log(tau_hi);
  auto axis = [](double lo, double hi, int points, int i) {
    return points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (points - 1);
  };
  for (int i = 0; i < search.omega_points; ++i) {
    for (int j = 0; j < search.tau_points; ++j) {
      run(axis(ulo, uhi, search.omega_points, i), axis(vlo, vhi, search.tau_points, j));
    }
  }

  out.converged = true;
  const double du = search.omega_points > 1 ? (uhi - ulo) / (search.omega_points - 1) : 0.1;
  const double dv = search.tau_points > 1 ? (vhi - vlo) / (search.tau_points - 1) : 0.1;
  // The longest time is refined from the grid; the others start from the best
  // point seen so far with a smaller simplex, since the optimum barely moves
  // with T.
  out.per_time.resize(times.size());
  std::vector<double> best_g(times.size());
  std::vector<std::size_t> order{times.size() - 1};
  for (std::size_t t = 0; t + 1 < times.size(); ++t) order.push_back(t);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t t = order[k];
    auto best_for = [&] {
      const Candidate* best = &seen.front();
      for (const auto& c : seen) {
        if (c.g[t].g > best->g[t].g) best = &c;
      }
      return *best;
    };
    const Candidate start = best_for();
    const double shrink = k == 0 ? 0.5 : 0.25;
    NelderMeadOptions nm;
    nm.max_evaluations = search.max_evaluations;
    nm.x_tolerance = kMzLogTolerance;
    nm.f_tolerance = kMzGTolerance;
    nm.initial_step = {du > 0.0 ? shrink * du : 0.05, dv > 0.0 ? shrink * dv : 0.05};
    const auto res = nelder_mead(
        [&](const std::vector<double>& x) { return -run(x[0], x[1]).g[t].g; }, {start.u, start.v},
        {ulo, vlo}, {uhi, vhi}, nm);
    out.converged = out.converged && res.converged;
    const Candidate best = best_for();
    MzTimePoint& pt = out.per_time[t];
    pt.interrogation_time = times[t];
    pt.g = best.g[t].g;
    pt.omega_bs = std::exp(best.u);
    pt.tau_bs = std::exp(best.v);
    pt.detail = best.g[t];
    best_g[t] = pt.g;
  }
  out.evaluations = eval.evaluations();

  const auto& last = out.per_time.back();
  out.pulses = {last.omega_bs, last.tau_bs, out.mirror.omega_opt, out.mirror.tau_opt};

  if (search.joint) {
    // Refine all four parameters at the longest interrogation time.
    const double t_long = times.back();
    const CloudSpec cloud = mirror_cloud(n, sigma);
    auto g_at = [&](const std::vector<double>& x) {
      MzPulses p{std::exp(x[0]), std::exp(x[1]), std::exp(x[2]), std::exp(x[3])};
      if (omega_max && (p.omega_bs > *omega_max || p.omega_m > *omega_max)) return 0.0;
      MzSearch local = search;
      local.interrogation_times = {t_long};
      local.min_time_ratio = search.min_time_ratio;
      return mz_g_factors(cloud, p, {t_long}, local).front().g;
    };
    const double mu = std::log(out.mirror.omega_opt), mv = std::log(out.mirror.tau_opt);
    const double mu_hi = omega_max ? std::log(*omega_max) : mu + std::log(search.omega_span);
    NelderMeadOptions nm;
    nm.max_evaluations = search.joint_evaluations;
    nm.x_tolerance = kMzLogTolerance;
    nm.f_tolerance = kMzGTolerance;
    const auto res = nelder_mead(
        [&](const std::vector<double>& x) { return -g_at(x); },
        {std::log(out.pulses.omega_bs), std::log(out.pulses.tau_bs), mu, mv},
        {ulo, vlo, mu - std::log(search.omega_span), mv + std::log(search.tau_lower)},
        {uhi, vhi, std::max(mu, mu_hi), mv + std::log(search.tau_upper)}, nm);
    if (-res.f > last.g) {
      out.pulses = {std::exp(res.x[0]), std::exp(res.x[1]), std::exp(res.x[2]),
                    std::exp(res.x[3])};
      const auto g = mz_g_factors(cloud, out.pulses, times, search);
      best_g.clear();
      for (std::size_t t = 0; t < times.size(); ++t) {
        out.per_time[t].g = g[t].g;
        out.per_time[t].detail = g[t];
        out.per_time[t].omega_bs = out.pulses.omega_bs;
        out.per_time[t].tau_bs = out.pulses.tau_bs;
        best_g.push_back(g[t].g);
      }
    }
  }

  const auto [g_inf, spread] = extrapolate_infinite_time(times, best_g);
  out.g_max = g_inf;
  out.g_err = spread;
  return out;
}

}  // namespace

std::vector<GFactor> mz_g_factors(const CloudSpec& cloud, const MzPulses& pulses,
                                  const std::vector<double>& interrogation_times,
                                  const MzSearch& search) {
  cloud.validate();
  search.validate();
  const double sigma = cloud.momentum_width;
  const auto rule = mz_rule(sigma, search);
  const auto phi = default_phi_grid(cloud.bragg_order, search.phi_points);
  std::vector<GFactor> out;
  for (double t : interrogation_times) {
    const auto seq = mach_zehnder_sequence(pulses.omega_bs, pulses.tau_bs, pulses.omega_m,
                                           pulses.tau_m, t, 0.0);
    out.push_back(g_factor(
        mz_fringe(cloud.bragg_order, sigma, seq, phi, rule, search.mirror.simulation)));
  }
  return out;
}

MzResult optimize_mz(const CloudSpec& cloud, std::optional<double> omega_max,
                     const MzSearch& search) {
  cloud.validate();
  return optimize_mz_impl(cloud.bragg_order, cloud.momentum_width, omega_max, search);
}

MzResult optimize_mz(int bragg_order, double sigma, std::optional<double> omega_max,
                     const MzSearch& search) {
  if (bragg_order < 1) throw ValidationError("mz: bragg_order must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("mz: sigma must be >= 0");
  return optimize_mz_impl(bragg_order, sigma, omega_max, search);
}

std::string to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::thermal: return "thermal";
    case SourceKind::expanded_bec: return "expanded-bec";
    case SourceKind::atom_laser: return "atom-laser";
    case SourceKind::plane_wave: return "plane-wave";
  }
  return "unknown";
}

SourceKind parse_source_kind(const std::string& name) {
  for (auto k : {SourceKind::thermal, SourceKind::expanded_bec, SourceKind::atom_laser,
                 SourceKind::plane_wave}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown source kind '" + name + "'");
}

SourceModel SourceModel::thermal(double sigma, double sigma0) {
  return {SourceKind::thermal, sigma, sigma0, std::nullopt};
}
SourceModel SourceModel::expanded_bec(double sigma) {
  return {SourceKind::expanded_bec, sigma, 1.0, std::nullopt};
}
SourceModel SourceModel::atom_laser(double sigma) {
  return {SourceKind::atom_laser, sigma, 1.0, std::nullopt};
}
SourceModel SourceModel::plane_wave() { return {SourceKind::plane_wave, 0.0, 1.0, std::nullopt}; }

void SourceModel::validate() const {
  if (flux_ratio && !(*flux_ratio > 0.0)) throw ValidationError("source: flux_ratio must be > 0");
  if (kind == SourceKind::plane_wave) return;
  if (!(sigma > 0.0)) throw ValidationError("source: sigma must be positive");
  if (kind == SourceKind::thermal) {
    if (!(sigma0 > 0.0)) throw ValidationError("source: sigma0 must be positive");
    if (sigma > sigma0) {
      throw ValidationError("source: thermal velocity selection needs sigma <= sigma0");
    }
  }
}

double SourceModel::atom_number() const {
  validate();
  if (flux_ratio) return *flux_ratio;
  return kind == SourceKind::thermal ? sigma / sigma0 : kCondensedFluxRatio;
}

double SourceModel::effective_sigma() const { return kind == SourceKind::plane_wave ? 0.0 : sigma; }

double g_eff(const SourceModel& source, int bragg_order, double g_max) {
  if (bragg_order < 1) throw ValidationError("g_eff: bragg_order must be >= 1");
  return bragg_order * std::sqrt(source.atom_number()) * g_max;
}

const SourceRow* SourceComparison::best(SourceKind kind) const {
  const SourceRow* out = nullptr;
  for (const auto& r : rows) {
    if (r.source.kind == kind && (!out || r.g_eff > out->g_eff)) out = &r;
  }
  return out;
}

SourceComparison source_compare(const std::vector<SourceModel>& sources, int n_min, int n_max,
                                const std::vector<double>& thermal_sigmas,
                                std::optional<double> omega_max, const MzSearch& search) {
  if (n_min < 1 || n_max < n_min) throw ValidationError("source_compare: bad order range");
  std::vector<SourceModel> expanded;
  for (const auto& s : sources) {
    if (s.kind == SourceKind::thermal && !thermal_sigmas.empty()) {
      for (double sig : thermal_sigmas) {
        SourceModel t = s;
        t.sigma = sig;
        expanded.push_back(t);
      }
    } else {
      expanded.push_back(s);
    }
  }
  for (const auto& s : expanded) s.validate();

  std::map<std::pair<int, double>, MzResult> cache;
  SourceComparison out;
  for (const auto& s : expanded) {
    for (int n = n_min; n <= n_max; ++n) {
      const double sigma = s.effective_sigma();
      const auto key = std::pair{n, sigma};
      auto it = cache.find(key);
      if (it == cache.end()) it = cache.emplace(key, optimize_mz_impl(n, sigma, omega_max, search)).first;
      SourceRow row;
      row.source = s;
      row.bragg_order = n;
      row.mz = it->second;
      row.g_eff = g_eff(s, n, row.mz.g_max);
      out.rows.push_back(row);
    }
  }
  for (auto kind : {SourceKind::thermal, SourceKind::expanded_bec, SourceKind::atom_laser,
                    SourceKind::plane_wave}) {
    SourceRow* top = nullptr;
    for (auto& r : out.rows) {
      if (r.source.kind == kind && (!top || r.g_eff > top->g_eff)) top = &r;
    }
    if (top) top->best = true;
  }
  return out;
}

}  // namespace braggkit
