#include <algorithm>
#include <cmath>
#include <numbers>

#include "braggkit/error.hpp"
#include "braggkit/ladder.hpp"
#include "braggkit/mz.hpp"
#include "braggkit/two_level.hpp"
#include "doctest.h"

using namespace braggkit;

namespace {

constexpr double kPi = std::numbers::pi;

// One continuous integration through the whole sequence.
std::pair<double, double> direct_populations(int n, double delta, const PulseSequence& seq) {
  double omega = 0.0;
  for (const auto& p : seq.pulses) omega = std::max(omega, p.amplitude);
  const Ladder ladder(n, working_order(n, omega) + 2, delta);
  const auto s = evolve(LadderState::initial(ladder, seq.window_start()), seq, seq.window_end());
  return {target_population(s, -n), target_population(s, n)};
}

PulseSequence square_mz(double omega, double tau_half, double t, double phi) {
  auto seq = mach_zehnder_sequence(omega, tau_half, omega, 2.0 * tau_half, t, phi);
  for (auto& p : seq.pulses) p.shape = PulseShape::square;
  return seq;
}

}  // namespace

TEST_CASE("kernel composition matches continuous integration") {
  struct Case {
    int n;
    double delta;
    double phi;
  };
  for (const auto& c : {Case{1, 0.0, 0.0}, Case{2, 0.031, 0.7}, Case{3, -0.12, 2.0}}) {
    const double om = 1.5 * c.n * c.n;
    const auto seq = mach_zehnder_sequence(om, 0.3, 1.3 * om, 0.35, 9.0, c.phi);
    const auto [dm, dp] = direct_populations(c.n, c.delta, seq);
    const auto [km, kp] = mz_node_populations(c.n, c.delta, seq);
    CHECK(std::abs(km - (dm)) <= 1e-6);
    CHECK(std::abs(kp - (dp)) <= 1e-6);
  }
  // Unequal spacing and overlapping windows are rejected.
  auto bad = mach_zehnder_sequence(5.0, 0.3, 5.0, 0.3, 9.0, 0.0);
  bad.pulses[2].center += 1.0;
  CHECK_THROWS_AS(mz_node_populations(1, 0.0, bad), ValidationError);
}

TEST_CASE("fringe against a brute-force momentum average") {
  const int n = 1;
  const double sigma = 0.05;
  const auto seq = mach_zehnder_sequence(4.0, 0.5, 5.0, 0.6, 40.0, 0.0);
  const std::vector<double> phis{0.0, 0.9, kPi};
  const auto scan = mz_fringe(CloudSpec{n, sigma}, seq, phis);
  for (std::size_t j = 0; j < phis.size(); ++j) {
    auto shifted = seq;
    shifted.pulses[2].phase = phis[j];
    const int k = 600;
    const double a = -6.0 * sigma;
    const double h = 12.0 * sigma / k;
    double pm = 0.0;
    double pp = 0.0;
    for (int i = 0; i <= k; ++i) {
      const double d = a + i * h;
      const double wgt = (i == 0 || i == k) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double rho = std::exp(-0.5 * d * d / (sigma * sigma)) / std::sqrt(2.0 * kPi) / sigma;
      const auto [m, p] = mz_node_populations(n, d, shifted);
      pm += wgt * rho * m;
      pp += wgt * rho * p;
    }
    CHECK(std::abs(scan.p_minus[j] - (pm * h / 3.0)) <= 1e-5);
    CHECK(std::abs(scan.p_plus[j] - (pp * h / 3.0)) <= 1e-5);
  }
}

TEST_CASE("deep bragg square pulses agree with the two-level interferometer") {
  const double omega = 0.5;
  const double tau_half = 0.5 * kPi / omega;
  const double t = 200.0;
  for (double sigma : {0.01, 0.03, 0.06}) {
    const auto seq = square_mz(omega, tau_half, t, 0.0);
    const auto full = g_factor(mz_fringe(1, sigma, seq, default_phi_grid(1),
                                         gauss_hermite_normal(61)));
    const double w = 4.0 * sigma / omega;
    const auto oracle = two_level_mz(w, omega * t, default_phi_grid(1), 1);
    CHECK(std::abs(full.g - (oracle.g.g)) <= 1e-2);
    CHECK(std::abs(full.population - (oracle.g.population)) <= 1e-2);
  }
}

namespace {

double period_error(int n, const PulseSequence& seq, double shift, double sigma) {
  const std::vector<double> phis{0.2, 0.9, 1.7};
  std::vector<double> shifted;
  for (double p : phis) shifted.push_back(p + shift);
  const CloudSpec cloud{n, sigma};
  const auto a = mz_fringe(cloud, seq, phis);
  const auto b = mz_fringe(cloud, seq, shifted);
  double worst = 0.0;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    CHECK(a.p_rel[i] >= 0.0);
    CHECK(a.p_rel[i] <= 1.0);
    worst = std::max({worst, std::abs(a.p_minus[i] - b.p_minus[i]),
                      std::abs(a.p_plus[i] - b.p_plus[i])});
  }
  CHECK(a.p_total <= 1.0 + 1e-9);
  return worst;
}

}  // namespace

// The third pulse multiplies order m by exp(-i m phi / 2). A shift of 2 pi / n
// leaves only orders m = n (mod 2n) in step, so the 2 pi / n period is exact
// for n = 1 and otherwise holds to the extent intermediate orders are empty.
TEST_CASE("fringe period is 2 pi / n") {
  const auto strong = [](int n) {
    const double om = 1.5 * n * n;
    return mach_zehnder_sequence(om, 0.3, 1.3 * om, 0.35, 200.0, 0.0);
  };
  CHECK(period_error(1, strong(1), 2.0 * kPi, 0.05) <= 1e-9);
  for (int n : {2, 3}) CHECK(period_error(n, strong(n), 2.0 * kPi, 0.05) <= 1e-9);

  // Deep Bragg pulses keep the ladder on +-n.
  CHECK(period_error(2, mach_zehnder_sequence(2.0, 1.77, 2.0, 3.54, 200.0, 0.0), kPi, 0.01) <=
        1e-6);
  CHECK(period_error(3, mach_zehnder_sequence(6.0, 2.0, 6.0, 4.0, 200.0, 0.0), 2.0 * kPi / 3.0,
                     0.01) <= 1e-6);

  // Short strong pulses leave population in order 0 and break it visibly.
  CHECK(period_error(2, strong(2), kPi, 0.05) > 1e-3);
}

TEST_CASE("doubling a long interrogation time barely moves G") {
  const MzPulses gentle{.omega_bs = 2.0, .tau_bs = 1.77, .omega_m = 2.0, .tau_m = 3.54};
  const MzPulses optimised{.omega_bs = 9.039, .tau_bs = 0.778, .omega_m = 13.536, .tau_m = 0.561};
  for (const auto& pulses : {gentle, optimised}) {
    const auto g = mz_g_factors(CloudSpec{2, 0.05}, pulses, {200.0, 400.0, 800.0});
    for (const auto& x : g) {
      CHECK(x.g >= 0.0);
      CHECK(x.g <= 1.0);
    }
    CHECK(std::abs(g[1].g - g[0].g) <= 2e-3);
    CHECK(std::abs(g[2].g - g[1].g) <= 2e-3);
  }
}

TEST_CASE("interrogation time scaling and extrapolation") {
  MzSearch s;
  const auto same = scaled_interrogation_times(s, 1.0);
  CHECK(same == std::vector<double>{200.0, 400.0, 800.0});
  const auto scaled = scaled_interrogation_times(s, 20.0);
  CHECK(scaled.front() == doctest::Approx(400.0));
  CHECK(scaled.back() == doctest::Approx(1600.0));

  const auto [g0, spread0] = extrapolate_infinite_time({100.0, 200.0, 400.0},
                                                       {0.8 - 3.0 / 100, 0.8 - 3.0 / 200, 0.8 - 3.0 / 400});
  CHECK(g0 == doctest::Approx(0.8));
  CHECK(spread0 < 1e-12);
  const auto [g1, spread1] = extrapolate_infinite_time({100.0, 200.0}, {0.5, 0.6});
  CHECK(g1 == doctest::Approx(0.7));
  CHECK(spread1 == doctest::Approx(0.1));
  CHECK(extrapolate_infinite_time({100.0, 200.0}, {0.9, 0.99}).first == 1.0);
  CHECK_THROWS_AS(extrapolate_infinite_time({100.0}, {}), ValidationError);

  s.min_time_ratio = 10.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = MzSearch{};
  s.phi_points = 3;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("source models") {
  CHECK(SourceModel::thermal(1.0, 1.0).atom_number() == 1.0);
  CHECK(SourceModel::thermal(0.1, 1.0).atom_number() == doctest::Approx(0.1));
  CHECK(SourceModel::expanded_bec().atom_number() == doctest::Approx(1.0 / 25.0));
  CHECK(SourceModel::atom_laser().atom_number() == doctest::Approx(1.0 / 25.0));
  CHECK(SourceModel::plane_wave().atom_number() == doctest::Approx(1.0 / 25.0));
  CHECK(SourceModel::plane_wave().effective_sigma() == 0.0);
  CHECK_THROWS_AS(SourceModel::thermal(1.5, 1.0).validate(), ValidationError);
  CHECK_THROWS_AS(g_eff(SourceModel::thermal(1.5, 1.0), 2, 0.5), ValidationError);
  auto laser = SourceModel::atom_laser();
  laser.flux_ratio = 1.0;
  CHECK(g_eff(laser, 5, 0.4) == doctest::Approx(2.0));
  CHECK(g_eff(SourceModel::expanded_bec(), 4, 0.5) == doctest::Approx(4.0 * 0.2 * 0.5));
  for (auto k : {SourceKind::thermal, SourceKind::expanded_bec, SourceKind::atom_laser,
                 SourceKind::plane_wave})
    CHECK(parse_source_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_source_kind("laser"), ValidationError);
}

namespace {

MzSearch coarse_search() {
  MzSearch s;
  s.omega_points = 3;
  s.tau_points = 3;
  s.max_evaluations = 12;
  s.mirror.omega_points = 6;
  s.mirror.tau_points = 6;
  s.mirror.max_evaluations = 40;
  return s;
}

}  // namespace

TEST_CASE("optimize_mz on a small case") {
  const auto r = optimize_mz(CloudSpec{1, 0.05}, 20.0, coarse_search());
  CHECK(r.g_max > 0.8);
  CHECK(r.g_max <= 1.0);
  CHECK(r.g_err >= 0.0);
  CHECK(r.clamped);
  CHECK(r.pulses.omega_bs <= 20.0);
  CHECK(r.per_time.size() == 3);
  CHECK(r.pulses.omega_m == doctest::Approx(r.mirror.omega_opt));
  for (const auto& p : r.per_time) CHECK(p.interrogation_time >= 20.0 * r.pulses.tau_m);

  const auto plane = optimize_mz(1, 0.0, 20.0, coarse_search());
  CHECK(plane.g_max >= r.g_max - 1e-6);
  CHECK(plane.g_max > 0.99);
  CHECK_THROWS_AS(optimize_mz(1, -0.1, 20.0), ValidationError);
}

TEST_CASE("source comparison bookkeeping") {
  auto laser = SourceModel::atom_laser(0.01);
  const auto cmp = source_compare({SourceModel::thermal(1.0), laser}, 1, 2, {0.05, 0.1}, 20.0,
                                  coarse_search());
  CHECK(cmp.rows.size() == 2 * 2 + 2);
  int best_thermal = 0;
  for (const auto& row : cmp.rows) {
    CHECK(row.g_eff == doctest::Approx(g_eff(row.source, row.bragg_order, row.mz.g_max)));
    if (row.best && row.source.kind == SourceKind::thermal) ++best_thermal;
  }
  CHECK(best_thermal == 1);
  const auto* bt = cmp.best(SourceKind::thermal);
  REQUIRE(bt != nullptr);
  CHECK(bt->best);
  for (const auto& row : cmp.rows)
    if (row.source.kind == SourceKind::thermal) CHECK(row.g_eff <= bt->g_eff);
  CHECK(cmp.best(SourceKind::plane_wave) == nullptr);
}
