#pragma once

#include <stdexcept>
#include <string>

namespace braggkit {

// Bad input: a parameter outside its documented domain.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Adaptive integration gave up (step underflow, step budget, norm drift).
struct IntegratorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No pulse satisfies the spontaneous-emission budget.
struct InfeasibleBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace braggkit
