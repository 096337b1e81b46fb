#include "braggkit/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "braggkit/error.hpp"

namespace braggkit {

Ladder::Ladder(int bragg_order_, int max_order_, double offset_, bool full_)
    : bragg_order(bragg_order_), max_order(max_order_), offset(offset_), full(full_) {
  if (bragg_order < 1) throw ValidationError("ladder: bragg_order must be >= 1");
  if (max_order < bragg_order) throw ValidationError("ladder: max_order must be >= bragg_order");
  if (!full && (max_order - bragg_order) % 2 != 0) {
    throw ValidationError("ladder: max_order must share the parity of bragg_order");
  }
}

int Ladder::min_order() const { return -max_order; }

int Ladder::size() const { return full ? 2 * max_order + 1 : max_order + 1; }

std::optional<int> Ladder::index_of(int m) const {
  if (m < -max_order || m > max_order) return std::nullopt;
  const int shifted = m - min_order();
  if (shifted % stride() != 0) return std::nullopt;
  return shifted / stride();
}

double Ladder::energy(int index) const {
  const double k = order(index) + offset;
  return k * k;
}

int truncation_order(int bragg_order, double omega) {
  if (bragg_order < 1) throw ValidationError("truncation_order: n must be >= 1");
  if (!(omega >= 0.0)) throw ValidationError("truncation_order: omega must be >= 0");
  const double n = bragg_order;
  const double extra = bragg_order % 2 == 0 ? 6.0 : 7.0;
  int m_max = static_cast<int>(std::floor(std::sqrt(omega + n * n) + extra));
  if ((m_max - bragg_order) % 2 != 0) ++m_max;
  return m_max;
}

int working_order(int bragg_order, double omega, int strong_drive_margin) {
  if (strong_drive_margin < 0 || strong_drive_margin % 2 != 0) {
    throw ValidationError("working_order: margin must be a non-negative even number");
  }
  const int base = truncation_order(bragg_order, omega);
  const double n = bragg_order;
  return omega > n * n ? base + strong_drive_margin : base;
}

LadderState LadderState::initial(const Ladder& ladder, double time) {
  LadderState s;
  s.ladder = ladder;
  s.amplitudes.assign(ladder.size(), Complex{});
  s.amplitudes[*ladder.index_of(-ladder.bragg_order)] = 1.0;
  s.time = time;
  return s;
}

double LadderState::norm() const {
  double sum = 0.0;
  for (const auto& c : amplitudes) sum += std::norm(c);
  return sum;
}

Complex LadderState::amplitude(int m) const {
  const auto idx = ladder.index_of(m);
  if (!idx) throw ValidationError("order " + std::to_string(m) + " is not on the ladder");
  return amplitudes[*idx];
}

double target_population(const LadderState& state, int m) { return std::norm(state.amplitude(m)); }

namespace {

struct DriveTerm {
  double amplitude;
  double duration;
  double center;
  double start;
  double end;
  Complex phase;
  PulseShape shape;
};

std::vector<DriveTerm> drive_terms(const PulseSequence& seq) {
  std::vector<DriveTerm> out;
  for (const auto& p : seq.pulses) {
    out.push_back({p.amplitude, p.duration, p.center, p.window_start(), p.window_end(),
                   std::polar(1.0, p.phase), p.shape});
  }
  return out;
}

Complex drive_at(const std::vector<DriveTerm>& terms, double t) {
  Complex total{};
  for (const auto& d : terms) {
    if (t < d.start || t > d.end) continue;
    double env = d.amplitude;
    if (d.shape == PulseShape::gaussian) {
      const double u = (t - d.center) / d.duration;
      env *= std::exp(-0.5 * u * u);
    }
    total += env * d.phase;
  }
  return total;
}

bool active_between(const std::vector<DriveTerm>& terms, double a, double b) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  for (const auto& d : terms) {
    if (d.amplitude > 0.0 && d.start < hi && d.end > lo) return true;
  }
  return false;
}

// Propagates `cols` interleaved complex vectors of ladder length from t0 to
// t1 in a frame rotating at the reference energy e0 (a global phase that the
// caller restores).
class BlockPropagator {
 public:
  BlockPropagator(const Ladder& ladder, std::vector<DriveTerm> terms, double e0, int cols,
                  const EvolveOptions& options)
      : ladder_(ladder), terms_(std::move(terms)), cols_(cols), options_(options) {
    const int n = ladder.size();
    detuning_.resize(n);
    for (int j = 0; j < n; ++j) detuning_[j] = ladder.energy(j) - e0;
    phases_.resize(n);
    double scale = 1.0;
    for (double d : detuning_) scale = std::max(scale, std::abs(d));
    for (const auto& t : terms_) scale += t.amplitude;
    h_ = 0.05 / scale;
  }

  void run(std::vector<double>& y, double t0, double t1) {
    std::vector<double> cuts{t0, t1};
    for (const auto& d : terms_) {
      for (double edge : {d.start, d.end}) {
        if (edge > std::min(t0, t1) && edge < std::max(t0, t1)) cuts.push_back(edge);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (t1 < t0) std::reverse(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k];
      const double b = cuts[k + 1];
      if (active_between(terms_, a, b)) {
        integrate(y, a, b);
      } else {
        free_phase(y, b - a);
      }
    }
  }

  long steps() const { return steps_; }

 private:
  void free_phase(std::vector<double>& y, double dt) const {
    const int n = ladder_.size();
    for (int j = 0; j < n; ++j) {
      const Complex ph = std::polar(1.0, -detuning_[j] * dt);
      for (int c = 0; c < cols_; ++c) {
        const std::size_t i = 2 * (static_cast<std::size_t>(c) * n + j);
        const Complex v = Complex(y[i], y[i + 1]) * ph;
        y[i] = v.real();
        y[i + 1] = v.imag();
      }
    }
  }

  // dy/dt = -i [D y + 1/2 (W y_{j+s} + W* y_{j-s})]
  void rhs(double t, std::span<const double> y, std::span<double> dy) const {
    const Complex w = drive_at(terms_, t);
    const double wr = 0.5 * w.real();
    const double wi = 0.5 * w.imag();
    const int n = ladder_.size();
    const int s = ladder_.coupling_step();
    for (int c = 0; c < cols_; ++c) {
      const double* yc = y.data() + 2 * static_cast<std::size_t>(c) * n;
      double* dc = dy.data() + 2 * static_cast<std::size_t>(c) * n;
      for (int j = 0; j < n; ++j) {
        double zr = detuning_[j] * yc[2 * j];
        double zi = detuning_[j] * yc[2 * j + 1];
        if (j + s < n) {
          const double ur = yc[2 * (j + s)];
          const double ui = yc[2 * (j + s) + 1];
          zr += wr * ur - wi * ui;
          zi += wr * ui + wi * ur;
        }
        if (j - s >= 0) {
          const double ur = yc[2 * (j - s)];
          const double ui = yc[2 * (j - s) + 1];
          zr += wr * ur + wi * ui;
          zi += wr * ui - wi * ur;
        }
        dc[2 * j] = zi;
        dc[2 * j + 1] = -zr;
      }
    }
  }

  // Interaction picture relative to t_ref: y_j = exp(i D_j (t - t_ref)) c_j.
  void rhs_interaction(double t, double t_ref, std::span<const double> y,
                       std::span<double> dy) const {
    const Complex w = 0.5 * drive_at(terms_, t);
    const int n = ladder_.size();
    const int s = ladder_.coupling_step();
    auto& ph = phases_;
    for (int j = 0; j < n; ++j) ph[j] = std::polar(1.0, detuning_[j] * (t - t_ref));
    for (int c = 0; c < cols_; ++c) {
      const double* yc = y.data() + 2 * static_cast<std::size_t>(c) * n;
      double* dc = dy.data() + 2 * static_cast<std::size_t>(c) * n;
      for (int j = 0; j < n; ++j) {
        Complex z{};
        if (j + s < n) z += w * ph[j] * std::conj(ph[j + s]) * Complex(yc[2 * (j + s)], yc[2 * (j + s) + 1]);
        if (j - s >= 0)
          z += std::conj(w) * ph[j] * std::conj(ph[j - s]) *
               Complex(yc[2 * (j - s)], yc[2 * (j - s) + 1]);
        dc[2 * j] = z.imag();
        dc[2 * j + 1] = -z.real();
      }
    }
  }

  void integrate(std::vector<double>& y, double a, double b) {
    const bool forward = b > a;
    const bool ip = options_.interaction_picture;
    auto f = [&](double t, std::span<const double> in, std::span<double> out) {
      if (ip) {
        rhs_interaction(t, a, in, out);
      } else {
        rhs(t, in, out);
      }
    };
    OdeStats st;
    if (forward) {
      st = integrate_dopri5(f, a, b, y, h_, options_.tolerances);
    } else {
      auto g = [&](double s, std::span<const double> in, std::span<double> out) {
        f(-s, in, out);
        for (auto& v : out) v = -v;
      };
      st = integrate_dopri5(g, -a, -b, y, h_, options_.tolerances);
    }
    steps_ += st.steps;
    if (ip) free_phase(y, b - a);
  }

  Ladder ladder_;
  std::vector<DriveTerm> terms_;
  int cols_;
  EvolveOptions options_;
  std::vector<double> detuning_;
  mutable std::vector<Complex> phases_;
  double h_;
  long steps_ = 0;
};

std::vector<double> interleave(const std::vector<Complex>& v) {
  std::vector<double> out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

std::vector<Complex> deinterleave(const std::vector<double>& y, std::size_t offset,
                                  std::size_t count, Complex global) {
  std::vector<Complex> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = Complex(y[2 * (offset + i)], y[2 * (offset + i) + 1]) * global;
  }
  return out;
}

void check_covers(const PulseSequence& drive, double t0, double t1) {
  if (drive.pulses.empty()) return;
  const double lo = std::min(t0, t1);
  const double hi = std::max(t0, t1);
  for (const auto& p : drive.pulses) {
    if (p.amplitude == 0.0) continue;
    if (p.window_start() < lo - 1e-12 || p.window_end() > hi + 1e-12) {
      throw ValidationError("evolve: integration window does not cover the drive support");
    }
  }
}

void check_norm(double before, double after, double tolerance) {
  const double drift = std::abs(after - before) / before;
  if (!(drift <= tolerance)) {
    throw IntegratorError("evolve: norm drift " + std::to_string(drift) +
                          " exceeds tolerance; raise max_order or tighten tolerances");
  }
}

PulseSequence single(const GaussianPulse& pulse) {
  PulseSequence seq;
  seq.pulses = {pulse};
  return seq;
}

}  // namespace

LadderState evolve(const LadderState& initial, const PulseSequence& drive, double t_end,
                   const EvolveOptions& options) {
  for (const auto& p : drive.pulses) p.validate();
  check_covers(drive, initial.time, t_end);
  const Ladder& ladder = initial.ladder;
  if (static_cast<int>(initial.amplitudes.size()) != ladder.size()) {
    throw ValidationError("evolve: amplitude count does not match the ladder");
  }
  const double norm0 = initial.norm();
  if (!(norm0 > 0.0)) throw ValidationError("evolve: zero initial state");

  double e0 = 0.0;
  for (int j = 0; j < ladder.size(); ++j) e0 += std::norm(initial.amplitudes[j]) * ladder.energy(j);
  e0 /= norm0;

  BlockPropagator prop(ladder, drive_terms(drive), e0, 1, options);
  std::vector<double> y = interleave(initial.amplitudes);
  prop.run(y, initial.time, t_end);

  LadderState out;
  out.ladder = ladder;
  out.time = t_end;
  out.amplitudes = deinterleave(y, 0, ladder.size(), std::polar(1.0, -e0 * (t_end - initial.time)));
  check_norm(norm0, out.norm(), options.norm_tolerance);
  return out;
}

// Column by column: each column is integrated relative to its own starting
// energy, which keeps the top orders from setting a common stiff step.
ComplexMatrix pulse_propagator(const Ladder& ladder, const GaussianPulse& pulse,
                               const EvolveOptions& options) {
  pulse.validate();
  const int n = ladder.size();
  ComplexMatrix m(n);
  for (int c = 0; c < n; ++c) {
    const auto col = pulse_propagator_column(ladder, pulse, ladder.order(c), options);
    std::copy(col.begin(), col.end(), m.data.begin() + static_cast<std::ptrdiff_t>(c) * n);
  }
  return m;
}

std::vector<Complex> pulse_propagator_column(const Ladder& ladder, const GaussianPulse& pulse,
                                             int m, const EvolveOptions& options) {
  const auto idx = ladder.index_of(m);
  if (!idx) throw ValidationError("propagator column: order not on the ladder");
  LadderState s;
  s.ladder = ladder;
  s.amplitudes.assign(ladder.size(), Complex{});
  s.amplitudes[*idx] = 1.0;
  s.time = pulse.window_start();
  return evolve(s, single(pulse), pulse.window_end(), options).amplitudes;
}

std::vector<Complex> pulse_propagator_row(const Ladder& ladder, const GaussianPulse& pulse, int m,
                                          const EvolveOptions& options) {
  const auto idx = ladder.index_of(m);
  if (!idx) throw ValidationError("propagator row: order not on the ladder");
  LadderState s;
  s.ladder = ladder;
  s.amplitudes.assign(ladder.size(), Complex{});
  s.amplitudes[*idx] = 1.0;
  s.time = pulse.window_end();
  auto back = evolve(s, single(pulse), pulse.window_start(), options).amplitudes;
  for (auto& v : back) v = std::conj(v);
  return back;
}

ComplexMatrix centred_kernel(const Ladder& ladder, const ComplexMatrix& window_propagator,
                             double half_window) {
  const int n = ladder.size();
  std::vector<Complex> ph(n);
  for (int j = 0; j < n; ++j) ph[j] = std::polar(1.0, ladder.energy(j) * half_window);
  ComplexMatrix k(n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) k(r, c) = ph[r] * window_propagator(r, c) * ph[c];
  }
  return k;
}

}  // namespace braggkit
