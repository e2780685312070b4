#pragma once

#include <stdexcept>
#include <string>

namespace simlab {

// Bad parameters passed by a caller (a < b violated, p outside [0,1], ...)
// are reported with std::invalid_argument. The two types below cover the
// remaining failure classes.

/// A model definition broke one of its own invariants: negative propensity,
/// envelope f > C*g, importance-sampling support violation, ...
class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not deliver: non-convergence, a matrix that is
/// not positive definite, a state that became non-finite.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

}  // namespace simlab
