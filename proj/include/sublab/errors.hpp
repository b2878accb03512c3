#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sublab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A malformed polynomial string. `position()` is the 0-based character offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)), reason_(message), position_(position) {}
  std::size_t position() const noexcept { return position_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string reason_;
  std::size_t position_;
};

/// No n-tuple of the extended family spans at the requested point.
class HormanderFailure : public Error {
 public:
  using Error::Error;
};

/// An argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A metric ball (or cylinder) does not fit in the lattice it is measured on.
class BallEscapesBox : public Error {
 public:
  using Error::Error;
};

/// Some lattice nodes cannot be reached with the configured move set.
class DisconnectedField : public Error {
 public:
  using Error::Error;
};

class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class CflViolation : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& message, int iterations)
      : Error(message + " after " + std::to_string(iterations) + " iterations"),
        iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

/// A ratio whose denominator vanishes (constant test function, zero gradient).
class DegenerateRatio : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sublab
