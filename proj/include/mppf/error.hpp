#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mppf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input or configuration (maps to CLI exit status 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value outside the domain of a model function (non-finite input).
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Query outside the supported range, e.g. interpolation outside a unit path.
class RangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A dataset that violates its invariants (non-increasing times, ...).
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Numerical abort during a run (maps to CLI exit status 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Euler recursion produced a non-finite state.
class OverflowError : public NumericError {
 public:
  OverflowError(std::size_t step, const std::string& what)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Every particle weight is zero at some unit time.
class DegenerateWeightsError : public NumericError {
 public:
  DegenerateWeightsError(long time, const std::string& what)
      : NumericError(what + " (unit time " + std::to_string(time) + ")"), time_(time) {}
  long time() const noexcept { return time_; }

 private:
  long time_;
};

/// Evaluation at a singular point (zero intensity at an event, zero diffusion).
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A reference or bias estimate whose Monte Carlo error is too large for the
/// requested resolution.
class UnderResolvedError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mppf
