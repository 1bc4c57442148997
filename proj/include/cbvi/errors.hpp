#pragma once

#include <stdexcept>
#include <string>

namespace cbvi {

/// Non-finite state, failed implicit solve, or a broken integrator invariant.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested combination the integrators do not support (e.g. AVI with a non-quadratic chi).
class IncompatibleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cbvi
