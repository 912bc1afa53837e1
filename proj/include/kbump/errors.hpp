#pragma once

#include <stdexcept>
#include <string>

namespace kbump {

/// Input outside the admissible parameter set (bad exponent, empty k list, ...).
/// The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical method did not deliver: bracket not found, stagnation,
/// contraction or Newton failure. The CLI maps it to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kbump
