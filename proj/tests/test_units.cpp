#include <cmath>
#include <numbers>
#include <random>

#include "braggkit/error.hpp"
#include "braggkit/units.hpp"
#include "doctest.h"

using namespace braggkit;

TEST_CASE("rb87 preset constants") {
  const auto rb = rb87_d2();
  CHECK(rb.recoil_frequency == 2.0 * std::numbers::pi * 3.8e3);
  CHECK(rb.linewidth == 2.0 * std::numbers::pi * 6.07e6);
  CHECK(rb.dipole_moment == 2e-29);
  CHECK(rb.saturation_intensity == 16.0);
  CHECK(rb.wavelength == 780e-9);
  CHECK(preset("rb87-d2").recoil_frequency == rb.recoil_frequency);
  CHECK_THROWS_AS(preset("cs133-d2"), ValidationError);
}

TEST_CASE("unit conversion examples") {
  const auto rb = rb87_d2();
  const double t = to_physical(1.0, QuantityKind::time, rb);
  CHECK(t == doctest::Approx(1.0 / (2.0 * std::numbers::pi * 3800.0)).epsilon(1e-15));
  CHECK(t == doctest::Approx(41.9e-6).epsilon(1e-3));
  CHECK(to_physical(0.0, QuantityKind::frequency, rb) == 0.0);
  // Clamped n = 6 mirror durations land in the millisecond range.
  CHECK(to_physical(19.0, QuantityKind::time, rb) == doctest::Approx(0.796e-3).epsilon(1e-2));
  CHECK(to_physical(26.0, QuantityKind::time, rb) == doctest::Approx(1.089e-3).epsilon(1e-2));
}

TEST_CASE("unit conversion round trip") {
  const auto rb = rb87_d2();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> exponent(-6.0, 6.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::pow(10.0, exponent(rng));
    for (auto kind : {QuantityKind::time, QuantityKind::frequency}) {
      const double back = from_physical(to_physical(x, kind, rb), kind, rb);
      CHECK(std::abs(back - x) <= 4e-16 * x);
    }
  }
}

TEST_CASE("quantity kind parsing and bad transitions") {
  CHECK(parse_quantity_kind("time") == QuantityKind::time);
  CHECK(parse_quantity_kind("frequency") == QuantityKind::frequency);
  CHECK_THROWS_AS(parse_quantity_kind("length"), ValidationError);
  auto bad = rb87_d2();
  bad.recoil_frequency = 0.0;
  CHECK_THROWS_AS(to_physical(1.0, QuantityKind::time, bad), ValidationError);
}

TEST_CASE("cloud validation and density normalisation") {
  CHECK_NOTHROW(CloudSpec{3, 0.1}.validate());
  CHECK_THROWS_AS((CloudSpec{0, 0.1}.validate()), ValidationError);
  CHECK_THROWS_AS((CloudSpec{1, 0.0}.validate()), ValidationError);
  CHECK_THROWS_AS((CloudSpec{1, -0.2}.validate()), ValidationError);

  const CloudSpec cloud{2, 0.3};
  // Composite Simpson over +-10 sigma.
  const int k = 4000;
  const double a = -3.0;
  const double h = 6.0 / k;
  double sum = 0.0;
  double second = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double x = a + i * h;
    const double wgt = (i == 0 || i == k) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += wgt * momentum_density(cloud, x);
    second += wgt * x * x * momentum_density(cloud, x);
  }
  CHECK(sum * h / 3.0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(second * h / 3.0 == doctest::Approx(0.09).epsilon(1e-10));
}

TEST_CASE("pulse windows") {
  GaussianPulse g{.amplitude = 4.0, .duration = 0.5, .center = 2.0};
  CHECK(g.window_start() == doctest::Approx(-0.5));
  CHECK(g.window_end() == doctest::Approx(4.5));
  GaussianPulse s = g;
  s.shape = PulseShape::square;
  CHECK(s.window_start() == doctest::Approx(1.75));
  CHECK(s.window_end() == doctest::Approx(2.25));
  g.duration = 0.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g.duration = 1.0;
  g.amplitude = -1.0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
}

TEST_CASE("mach-zehnder sequence layout") {
  const auto seq = mach_zehnder_sequence(5.0, 0.4, 9.0, 0.3, 100.0, 0.7);
  REQUIRE(seq.pulses.size() == 3);
  CHECK(seq.pulses[0].center == 0.0);
  CHECK(seq.pulses[1].center == 100.0);
  CHECK(seq.pulses[2].center == 200.0);
  CHECK(seq.pulses[0].phase == 0.0);
  CHECK(seq.pulses[1].phase == 0.0);
  CHECK(seq.pulses[2].phase == 0.7);
  CHECK(seq.pulses[1].amplitude == 9.0);
  CHECK_NOTHROW(seq.validate());
  CHECK(seq.window_start() == doctest::Approx(-2.0));
  CHECK(seq.window_end() == doctest::Approx(202.0));
  // T must be at least 20 pulse durations.
  CHECK_THROWS_AS(mach_zehnder_sequence(5.0, 0.4, 9.0, 0.3, 7.9, 0.0).validate(), ValidationError);
  CHECK_NOTHROW(mach_zehnder_sequence(5.0, 0.4, 9.0, 0.3, 8.0, 0.0).validate());
}
