#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pspider {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, schedules, command-line arguments or inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A vector or matrix whose length disagrees with the model; `index` names
/// the offending item (probe, row, ...) when one exists.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Factorization failure, quadrature underflow, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised when a matrix handed out as a preconditioner is unusable.
class PreconditionerError : public NumericalError {
 public:
  enum class Kind { kNotSymmetric, kNotPositiveDefinite };
  PreconditionerError(const std::string& what, Kind kind)
      : NumericalError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Cholesky pivot that is not strictly positive.
class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(const std::string& what, std::size_t pivot)
      : NumericalError(what), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Unreadable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A self-check (model validation, gradient identity, ...) did not pass.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace pspider
