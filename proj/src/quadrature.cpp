#include "braggkit/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "braggkit/error.hpp"

namespace braggkit {

namespace {

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// probabilists' Hermite recurrence, weights the squared first components of
// the normalised eigenvectors.
QuadratureRule golub_welsch_hermite(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v = solver.eigenvectors()(0, i);
    rule.weights[i] = v * v;
  }
  // Symmetrise against round-off so odd rules hit delta = 0 exactly.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite_normal(int points) {
  if (points < 1) throw ValidationError("quadrature: need at least one node");
  if (points == 1) return QuadratureRule{{0.0}, {1.0}};
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(points);
  if (it == cache.end()) it = cache.emplace(points, golub_welsch_hermite(points)).first;
  return it->second;
}

QuadratureRule gauss_legendre(int points, double a, double b) {
  if (points < 1) throw ValidationError("quadrature: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const int n = points;
  const double mid = 0.5 * (a + b);
  const double half_width = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= 3e-16) break;
    }
    rule.nodes[i] = mid - half_width * z;
    rule.nodes[n - 1 - i] = mid + half_width * z;
    rule.weights[i] = 2.0 * half_width / ((1.0 - z * z) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

QuadratureRule normal_legendre(int panels, int points_per_panel, double cutoff) {
  if (panels < 1 || points_per_panel < 1 || !(cutoff > 0.0)) {
    throw ValidationError("normal_legendre: need panels, points and a positive cutoff");
  }
  QuadratureRule rule;
  const double width = 2.0 * cutoff / panels;
  for (int k = 0; k < panels; ++k) {
    const double a = -cutoff + k * width;
    const auto panel = gauss_legendre(points_per_panel, a, a + width);
    for (std::size_t i = 0; i < panel.nodes.size(); ++i) {
      const double x = panel.nodes[i];
      rule.nodes.push_back(x);
      rule.weights.push_back(panel.weights[i] * std::exp(-0.5 * x * x));
    }
  }
  const std::size_t n = rule.nodes.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes[n - 1 - i] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[n - 1 - i] + rule.weights[i]);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureRule scaled(const QuadratureRule& standard, double sigma) {
  QuadratureRule out = standard;
  for (auto& x : out.nodes) x *= sigma;
  return out;
}

}  // namespace braggkit
