#pragma once

#include <stdexcept>
#include <string>

namespace ticc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractionError : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra kernel failure (non-finite values, SVD non-convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

class EigensolverError : public Error {
 public:
  EigensolverError(const std::string& what, double bestResidual)
      : Error(what), bestResidual_(bestResidual) {}
  double bestResidual() const noexcept { return bestResidual_; }

 private:
  double bestResidual_;
};

/// Raised when a truncation exceeds the configured hard limit.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double discardedWeight)
      : Error(what), discardedWeight_(discardedWeight) {}
  double discardedWeight() const noexcept { return discardedWeight_; }

 private:
  double discardedWeight_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFamilyError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ticc
