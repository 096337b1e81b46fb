#pragma once

// Box-constrained Nelder-Mead minimiser. Trial points are projected onto the
// box, which keeps the simplex feasible without penalty terms.

#include <functional>
#include <vector>

namespace braggkit {

struct NelderMeadOptions {
  int max_evaluations = 200;
  double x_tolerance = 1e-4;  // simplex diameter, in the coordinates given
  double f_tolerance = 1e-9;  // spread of objective values over the simplex
  std::vector<double> initial_step;  // per coordinate; default 5% of the box
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const std::vector<double>& lower, const std::vector<double>& upper,
                             const NelderMeadOptions& options = {});

}  // namespace braggkit
