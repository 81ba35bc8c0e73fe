#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctista {

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

/// A precondition on a scalar argument was violated (negative variance, alpha <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Gram matrix is numerically singular.
class RankError : public Error {
 public:
  using Error::Error;
};

/// An iterate became NaN or Inf.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& where, std::size_t iteration)
      : Error(where + ": non-finite iterate at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Malformed configuration or parameter file content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctista
