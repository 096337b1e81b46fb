#include "braggkit/dephasing.hpp"

#include <cmath>

#include "braggkit/error.hpp"

namespace braggkit {

double dephased_average(const QuadratureRule& rule,
                        const std::vector<std::vector<std::complex<double>>>& amps,
                        std::span<const double> rates, double cutoff) {
  if (amps.size() != rule.nodes.size()) {
    throw ValidationError("dephased_average: one amplitude set per node required");
  }
  const std::size_t ns = rates.size();
  double total = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const auto& y = amps[i];
    const double xi = rule.nodes[i];
    double p = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      if (y[s] == 0.0) continue;
      p += std::norm(y[s]);
      for (std::size_t q = s + 1; q < ns; ++q) {
        const double dr = rates[s] - rates[q];
        if (std::abs(dr) > cutoff || y[q] == 0.0) continue;
        p += 2.0 * std::real(y[s] * std::conj(y[q]) * std::polar(1.0, dr * xi));
      }
    }
    total += rule.weights[i] * p;
  }
  return total;
}

}  // namespace braggkit
