#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmgme {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates the documented domain of an operation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Two inputs disagree on grid, channel count or matrix dimension.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A sampled integrand contained NaN or Inf.
class NonFiniteSample : public Error {
 public:
  explicit NonFiniteSample(std::size_t index)
      : Error("non-finite sample at index " + std::to_string(index)), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A time integration stopped before reaching its final time.
class EvolutionAborted : public Error {
 public:
  EvolutionAborted(const std::string& what, double last_valid_time)
      : Error(what + " (last valid time " + std::to_string(last_valid_time) + ")"),
        last_valid_time_(last_valid_time) {}

  double last_valid_time() const noexcept { return last_valid_time_; }

 private:
  double last_valid_time_;
};

}  // namespace nmgme
