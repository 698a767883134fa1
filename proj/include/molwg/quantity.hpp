#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <utility>

#include "molwg/error.hpp"

namespace molwg {

/// A value with an independent 1-sigma Gaussian uncertainty and a unit label.
struct Quantity {
  double value = 0.0;
  double sigma = 0.0;
  std::string unit;

  Quantity() = default;
  Quantity(double v, double s = 0.0, std::string u = {}) : value(v), sigma(s), unit(std::move(u)) {
    if (!(sigma >= 0.0)) throw DomainError("Quantity sigma must be >= 0");
  }

  double relative() const { return value == 0.0 ? 0.0 : sigma / std::abs(value); }
};

/// First-order propagation for independent inputs: sqrt(sum (df/dx_i * sigma_i)^2).
inline double propagate(std::initializer_list<std::pair<double, double>> partial_and_sigma) {
  double var = 0.0;
  for (const auto& [d, s] : partial_and_sigma) var += d * d * s * s;
  return std::sqrt(var);
}

}  // namespace molwg
