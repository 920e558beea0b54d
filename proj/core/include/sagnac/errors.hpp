#pragma once

#include <stdexcept>
#include <string>

namespace sagnac {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, malformed files, non-physical inputs.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to meet its convergence criterion.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace sagnac
