#pragma once

#include <stdexcept>
#include <string>

namespace molwg {

/// Input outside an operation's domain (NA > n, negative throughput, B >= S_c, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed structure: bad layer stacks, non-interior source layers, bad grids.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved, int iterations)
      : std::runtime_error(what + " (achieved " + std::to_string(achieved) + " after " +
                           std::to_string(iterations) + " iterations)"),
        achieved_(achieved),
        iterations_(iterations) {}

  double achieved() const noexcept { return achieved_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double achieved_;
  int iterations_;
};

/// g2 fit failure; carries the diagnostics that triggered it.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace molwg
