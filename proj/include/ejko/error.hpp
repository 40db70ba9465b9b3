#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace ejko {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad bounds, negative input, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Two objects that must live on the same grid do not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A scalar root find could not bracket or converge; `index` names the entry.
class RootFindError : public Error {
 public:
  RootFindError(std::size_t index, const std::string& what)
      : Error("root find failed at index " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Scaling factors left the representable range and absorption is disabled
/// (or the kernel itself underflowed).
class UnderflowError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve hit its iteration cap; `residual()` is the last L1 residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, const std::string& what) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Dense kernel storage would exceed the configured memory budget.
class MemoryBudgetError : public Error {
 public:
  using Error::Error;
};

/// Configuration file problems; `key()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : "config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace ejko
