#pragma once

// Gaussian averages of interferometer populations with free-evolution
// dephasing handled analytically.
//
// After the pulses, the amplitude at a quadrature node xi is a sum over
// "sectors" S of smooth amplitudes Y_S(xi) times a fast phase exp(i r_S xi).
// Cross terms between sectors with |r_S - r_S'| large average to
// exp(-(r_S - r_S')^2 / 2) under the Gaussian measure, far below anything a
// fixed node set can resolve; they are dropped beyond the threshold and
// integrated with the rule otherwise.

#include <complex>
#include <span>
#include <vector>

#include "braggkit/quadrature.hpp"

namespace braggkit {

// Rate difference (per unit standard-normal node) beyond which sector cross
// terms are treated as fully dephased: exp(-4.5^2/2) ~ 4e-5.
inline constexpr double kDephasingCutoff = 4.5;

// sector_amplitudes[i][s] is Y_s at node i of the standard-normal rule;
// rates[s] is r_s.
double dephased_average(const QuadratureRule& standard_rule,
                        const std::vector<std::vector<std::complex<double>>>& sector_amplitudes,
                        std::span<const double> rates, double cutoff = kDephasingCutoff);

}  // namespace braggkit
