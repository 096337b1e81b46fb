#pragma once

#include <vector>

namespace braggkit {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Rule for E[f(X)] with X ~ N(0, 1): nodes are sqrt(2) times the physicists'
// Hermite roots and the weights sum to 1. A 1-point rule is the delta at 0.
QuadratureRule gauss_hermite_normal(int points);

// Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int points, double a, double b);

// Composite Gauss-Legendre rule for the standard normal restricted to
// [-cutoff, cutoff], renormalised so the weights sum to 1. Symmetric about 0.
QuadratureRule normal_legendre(int panels, int points_per_panel, double cutoff);

// Same nodes scaled to N(0, sigma^2).
QuadratureRule scaled(const QuadratureRule& standard, double sigma);

}  // namespace braggkit
