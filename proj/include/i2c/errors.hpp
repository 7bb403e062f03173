#pragma once

#include <stdexcept>
#include <string>

namespace i2c {

/// Shapes, sizes or settings that cannot work together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed a value outside the operation's domain.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong order (e.g. backward before forward).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced NaN/Inf losses or gradients.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gradient failed its finite-difference spot check.
class AuditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace i2c
