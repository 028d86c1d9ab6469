#pragma once

#include <stdexcept>
#include <string>

namespace entrisk {

/// Bad input: malformed data, violated preconditions, out-of-range targets.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The computation itself failed: overflow, singular systems, quadrature
/// that does not settle.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigurationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OverflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AccuracyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace entrisk
