#pragma once

#include <stdexcept>
#include <string>

namespace projfp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be solved is singular (or numerically so).
class SingularError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the arguments does not hold.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Divergence or non-finite values during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A checked invariant of a generated object failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace projfp
