#include "braggkit/units.hpp"

#include <algorithm>
#include <cmath>

#include "braggkit/error.hpp"

namespace braggkit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void AtomicTransition::validate() const {
  require(recoil_frequency > 0.0, "transition: recoil_frequency must be > 0");
  require(linewidth > 0.0, "transition: linewidth must be > 0");
  require(dipole_moment > 0.0, "transition: dipole_moment must be > 0");
  require(saturation_intensity > 0.0, "transition: saturation_intensity must be > 0");
  require(wavelength > 0.0, "transition: wavelength must be > 0");
}

AtomicTransition rb87_d2() {
  return AtomicTransition{
      .recoil_frequency = kTwoPi * 3.8e3,
      .linewidth = kTwoPi * 6.07e6,
      .dipole_moment = 2e-29,
      .saturation_intensity = 16.0,  // 1.6 mW/cm^2
      .wavelength = 780e-9,
  };
}

AtomicTransition preset(std::string_view name) {
  if (name == "rb87-d2") return rb87_d2();
  throw ValidationError("unknown transition preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"rb87-d2"}; }

void CloudSpec::validate() const {
  require(bragg_order >= 1, "cloud: bragg_order must be >= 1");
  require(momentum_width > 0.0 && std::isfinite(momentum_width),
          "cloud: momentum_width must be > 0");
}

double momentum_density(const CloudSpec& cloud, double delta) {
  const double s = cloud.momentum_width;
  return std::exp(-delta * delta / (2.0 * s * s)) / std::sqrt(kTwoPi * s * s);
}

void GaussianPulse::validate() const {
  require(amplitude >= 0.0 && std::isfinite(amplitude), "pulse: amplitude must be >= 0");
  require(duration > 0.0 && std::isfinite(duration), "pulse: duration must be > 0");
  require(std::isfinite(center) && std::isfinite(phase), "pulse: center and phase must be finite");
}

double GaussianPulse::window_start() const {
  return shape == PulseShape::gaussian ? center - kGaussianWindowWidths * duration
                                       : center - 0.5 * duration;
}

double GaussianPulse::window_end() const {
  return shape == PulseShape::gaussian ? center + kGaussianWindowWidths * duration
                                       : center + 0.5 * duration;
}

void PulseSequence::validate() const {
  require(!pulses.empty(), "sequence: no pulses");
  double max_tau = 0.0;
  for (const auto& p : pulses) {
    p.validate();
    max_tau = std::max(max_tau, p.duration);
  }
  if (pulses.size() > 1) {
    require(interrogation_time >= 20.0 * max_tau,
            "sequence: interrogation_time must be >= 20 * max pulse duration");
  }
}

double PulseSequence::window_start() const {
  double t = pulses.front().window_start();
  for (const auto& p : pulses) t = std::min(t, p.window_start());
  return t;
}

double PulseSequence::window_end() const {
  double t = pulses.front().window_end();
  for (const auto& p : pulses) t = std::max(t, p.window_end());
  return t;
}

PulseSequence mach_zehnder_sequence(double omega_bs, double tau_bs, double omega_m,
                                    double tau_m, double interrogation_time, double phase) {
  PulseSequence seq;
  seq.interrogation_time = interrogation_time;
  seq.pulses = {
      GaussianPulse{.amplitude = omega_bs, .duration = tau_bs, .center = 0.0},
      GaussianPulse{.amplitude = omega_m, .duration = tau_m, .center = interrogation_time},
      GaussianPulse{.amplitude = omega_bs,
                    .duration = tau_bs,
                    .center = 2.0 * interrogation_time,
                    .phase = phase},
  };
  return seq;
}

QuantityKind parse_quantity_kind(std::string_view name) {
  if (name == "time") return QuantityKind::time;
  if (name == "frequency") return QuantityKind::frequency;
  throw ValidationError("unknown quantity kind '" + std::string(name) + "'");
}

double to_physical(double value, QuantityKind kind, const AtomicTransition& transition) {
  transition.validate();
  switch (kind) {
    case QuantityKind::time:
      return value / transition.recoil_frequency;
    case QuantityKind::frequency:
      return value * transition.recoil_frequency;
  }
  throw ValidationError("unknown quantity kind");
}

double from_physical(double value, QuantityKind kind, const AtomicTransition& transition) {
  transition.validate();
  switch (kind) {
    case QuantityKind::time:
      return value * transition.recoil_frequency;
    case QuantityKind::frequency:
      return value / transition.recoil_frequency;
  }
  throw ValidationError("unknown quantity kind");
}

}  // namespace braggkit
