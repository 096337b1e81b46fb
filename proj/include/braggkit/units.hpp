#pragma once

// Recoil unit system and the shared domain types.
//
// Frequencies are measured in units of the recoil frequency w_r = hbar k^2 / 2M,
// times in 1/w_r and momenta in hbar k. Physical (SI) values only appear at
// the boundaries: the CLI and the spontaneous-emission model.

#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace braggkit {

struct AtomicTransition {
  double recoil_frequency;      // w_r [rad/s]
  double linewidth;             // Gamma [rad/s]
  double dipole_moment;         // d [C m]
  double saturation_intensity;  // I_sat [W/m^2]
  double wavelength;            // [m]

  void validate() const;
};

// 87Rb D2 line, 780 nm.
AtomicTransition rb87_d2();

// Preset registry. Throws ValidationError for an unknown key.
AtomicTransition preset(std::string_view name);
std::vector<std::string> preset_names();

enum class MomentumDistribution { gaussian };

struct CloudSpec {
  int bragg_order = 1;          // n
  double momentum_width = 0.1;  // sigma [hbar k]
  MomentumDistribution distribution = MomentumDistribution::gaussian;

  void validate() const;
};

// Probability density rho(delta)^2 of the quasimomentum offset.
double momentum_density(const CloudSpec& cloud, double delta);

enum class PulseShape { gaussian, square };

// A single lattice pulse. For the Gaussian shape the drive is
// amplitude * exp(-(t - center)^2 / 2 duration^2) * exp(i phase), treated as
// zero outside center +- 5 duration. A square pulse has constant amplitude on
// [center - duration/2, center + duration/2].
struct GaussianPulse {
  double amplitude = 0.0;  // Omega [w_r]
  double duration = 1.0;   // tau [1/w_r]
  double center = 0.0;     // t0 [1/w_r]
  double phase = 0.0;      // phi [rad]
  PulseShape shape = PulseShape::gaussian;

  void validate() const;
  double window_start() const;
  double window_end() const;
};

inline constexpr double kGaussianWindowWidths = 5.0;

struct PulseSequence {
  std::vector<GaussianPulse> pulses;
  double interrogation_time = 0.0;  // T [1/w_r]; 0 for single-pulse drives

  // Checks each pulse and, for multi-pulse sequences, T >= 20 max(tau).
  void validate() const;
  double window_start() const;
  double window_end() const;
};

// Three-pulse Mach-Zehnder drive: beamsplitter at 0, mirror at T, phased
// beamsplitter at 2T.
PulseSequence mach_zehnder_sequence(double omega_bs, double tau_bs, double omega_m,
                                    double tau_m, double interrogation_time, double phase);

enum class QuantityKind { time, frequency };

QuantityKind parse_quantity_kind(std::string_view name);

// Recoil units -> seconds or rad/s.
double to_physical(double value, QuantityKind kind, const AtomicTransition& transition);
double from_physical(double value, QuantityKind kind, const AtomicTransition& transition);

}  // namespace braggkit
