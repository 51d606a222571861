#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace homlab {

using Index = std::int64_t;

/// Point in R^d for d <= 2; unused trailing coordinates stay zero.
using Point = std::array<double, 2>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad parameters, violated preconditions, malformed files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A linear or eigen solver failed. Carries the last residual it reached.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace homlab
