#pragma once

#include <stdexcept>
#include <string>

namespace esigo {

/// Base class for all esigo exceptions.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Inputs outside the mathematical domain of an operation
/// (quantile argument outside [0,1], non-finite coordinates, size mismatch).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

/// Structurally invalid configuration (bad weight vector, non-PD matrix,
/// malformed experiment file).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// A requested capability does not exist for the given object
/// (exact quantile for a general objective, gradient of a derivative-free
/// inner function).
class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& what) : Error(what) {}
};

/// A numerical routine failed to reach its accuracy target within budget.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

}  // namespace esigo
