#pragma once

// Small dense minimizers shared by the angle solvers, the CHSH optimizer and
// the tomography likelihood. Not part of the installed interface.

#include <functional>

#include <Eigen/Dense>

namespace sagnac::detail {

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double initial_step = 0.05;
  double x_tolerance = 1e-12;
  double f_tolerance = 1e-15;
  int max_iterations = 20000;
};

MinimizeResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& start,
                           const NelderMeadOptions& options = {});

/// Objective returning f(x) and writing its gradient and Hessian.
using SecondOrderObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                                                  Eigen::MatrixXd& hessian)>;

struct NewtonOptions {
  /// Stop once f improves by less than this for `stall_iterations` in a row.
  double f_tolerance = 1e-10;
  int stall_iterations = 2;
  double gradient_tolerance = 1e-13;
  int max_iterations = 500;
};

/// Newton steps with Levenberg damping whenever the Hessian is not positive
/// definite, and Armijo backtracking.
MinimizeResult damped_newton(const SecondOrderObjective& f, const Eigen::VectorXd& start,
                             const NewtonOptions& options = {});

}  // namespace sagnac::detail
