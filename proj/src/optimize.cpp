#include "braggkit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "braggkit/error.hpp"

namespace braggkit {

namespace {

struct Vertex {
  std::vector<double> x;
  double f;
};

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& lower, const std::vector<double>& upper,
                             const NelderMeadOptions& options) {
  const std::size_t dim = x0.size();
  if (dim == 0 || lower.size() != dim || upper.size() != dim) {
    throw ValidationError("nelder_mead: dimension mismatch");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(lower[i] <= upper[i])) throw ValidationError("nelder_mead: empty box");
  }
  if (options.max_evaluations < 1) throw ValidationError("nelder_mead: need evaluations");

  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
  };

  NelderMeadResult result;
  auto eval = [&](std::vector<double> x) {
    project(x);
    ++result.evaluations;
    return Vertex{x, f(x)};
  };

  project(x0);
  std::vector<Vertex> simplex;
  simplex.push_back(eval(x0));
  for (std::size_t i = 0; i < dim; ++i) {
    double step = options.initial_step.size() == dim ? options.initial_step[i]
                                                     : 0.05 * (upper[i] - lower[i]);
    if (step == 0.0) step = 1e-3;
    auto x = x0;
    // Step inwards when the start sits on the upper face.
    x[i] = x0[i] + step <= upper[i] ? x0[i] + step : x0[i] - step;
    simplex.push_back(eval(x));
  }

  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  while (true) {
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    double diameter = 0.0;
    for (std::size_t v = 1; v <= dim; ++v) {
      for (std::size_t i = 0; i < dim; ++i) {
        diameter = std::max(diameter, std::abs(simplex[v].x[i] - simplex[0].x[i]));
      }
    }
    const double spread = simplex[dim].f - simplex[0].f;
    if (diameter <= options.x_tolerance && spread <= options.f_tolerance) {
      result.converged = true;
      break;
    }
    if (result.evaluations >= options.max_evaluations) break;

    std::vector<double> centroid(dim, 0.0);
    for (std::size_t v = 0; v < dim; ++v) {
      for (std::size_t i = 0; i < dim; ++i) centroid[i] += simplex[v].x[i] / dim;
    }
    auto along = [&](double t) {
      std::vector<double> x(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] = centroid[i] + t * (simplex[dim].x[i] - centroid[i]);
      }
      return x;
    };

    const Vertex reflected = eval(along(-1.0));
    if (reflected.f < simplex[0].f) {
      if (result.evaluations < options.max_evaluations) {
        const Vertex expanded = eval(along(-2.0));
        simplex[dim] = expanded.f < reflected.f ? expanded : reflected;
      } else {
        simplex[dim] = reflected;
      }
      continue;
    }
    if (reflected.f < simplex[dim - 1].f) {
      simplex[dim] = reflected;
      continue;
    }
    const bool outside = reflected.f < simplex[dim].f;
    const Vertex contracted = eval(along(outside ? -0.5 : 0.5));
    if (contracted.f < std::min(reflected.f, simplex[dim].f)) {
      simplex[dim] = contracted;
      continue;
    }
    if (outside) simplex[dim] = reflected;
    // Shrink towards the best vertex.
    for (std::size_t v = 1; v <= dim; ++v) {
      if (result.evaluations >= options.max_evaluations) break;
      std::vector<double> x(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        x[i] = simplex[0].x[i] + 0.5 * (simplex[v].x[i] - simplex[0].x[i]);
      }
      simplex[v] = eval(x);
    }
  }
  std::stable_sort(simplex.begin(), simplex.end(), by_value);
  result.x = simplex[0].x;
  result.f = simplex[0].f;
  return result;
}

}  // namespace braggkit
