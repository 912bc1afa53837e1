#pragma once

#include <cmath>

#include "kbump/errors.hpp"

namespace kbump {

/// Radial potential V(r) = V0 + a (1 + r^2)^(-m/2) with V0 = 1.
///
/// Smooth at the origin, V >= 1, and V(r) = 1 + a/r^m + O(1/r^(m+2)) at
/// infinity.
struct PotentialSpec {
  double v0 = 1.0;
  double a = 1.0;
  double m = 2.0;

  PotentialSpec() = default;
  PotentialSpec(double amplitude, double decay_power) : a(amplitude), m(decay_power) { validate(); }

  void validate() const {
    if (!(a >= 0.0)) throw ValidationError("potential amplitude a must be >= 0");
    if (!(m > 1.0)) throw ValidationError("potential decay power m must be > 1");
  }

  /// V(r) - 1, the part that drives the bump configuration outward.
  [[nodiscard]] double excess(double r) const { return a * std::pow(1.0 + r * r, -0.5 * m); }
  [[nodiscard]] double operator()(double r) const { return v0 + excess(r); }
};

}  // namespace kbump
