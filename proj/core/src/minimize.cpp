#include "minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace sagnac::detail {

MinimizeResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& start, const NelderMeadOptions& options) {
  const Eigen::Index n = start.size();
  std::vector<Eigen::VectorXd> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) simplex[i + 1](i) += options.initial_step;
  for (Eigen::Index i = 0; i <= n; ++i) values[i] = f(simplex[i]);

  std::vector<Eigen::Index> order(n + 1);
  MinimizeResult result;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
    const Eigen::Index best = order.front();
    const Eigen::Index worst = order.back();
    const Eigen::Index second = order[n - 1];

    double spread = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i) {
      spread = std::max(spread, (simplex[i] - simplex[best]).cwiseAbs().maxCoeff());
    }
    if (spread < options.x_tolerance &&
        std::abs(values[worst] - values[best]) <= options.f_tolerance) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = f(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (Eigen::Index i = 0; i <= n; ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = f(simplex[i]);
    }
  }
  const auto best_it = std::min_element(values.begin(), values.end());
  result.x = simplex[static_cast<std::size_t>(best_it - values.begin())];
  result.value = *best_it;
  result.iterations = it;
  return result;
}

MinimizeResult damped_newton(const SecondOrderObjective& f, const Eigen::VectorXd& start,
                             const NewtonOptions& options) {
  const Eigen::Index n = start.size();
  Eigen::VectorXd x = start;
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hessian(n, n);
  double fx = f(x, grad, hessian);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  MinimizeResult result;
  int stalled = 0;
  int it = 0;
  Eigen::VectorXd trial_grad(n);
  Eigen::MatrixXd trial_hessian(n, n);
  for (; it < options.max_iterations; ++it) {
    if (!std::isfinite(fx)) break;
    if (grad.norm() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    // Smallest damping (0, then growing from a scale-aware floor) that makes
    // the system positive definite.
    const double scale = std::max(hessian.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    double mu = 0.0;
    Eigen::VectorXd direction;
    for (int k = 0; k < 60; ++k) {
      Eigen::LLT<Eigen::MatrixXd> llt(hessian + mu * identity);
      if (llt.info() == Eigen::Success) {
        direction = -llt.solve(grad);
        if (direction.allFinite() && grad.dot(direction) < 0.0) break;
      }
      direction.resize(0);
      mu = mu == 0.0 ? 1e-10 * scale : 4.0 * mu;
    }
    if (direction.size() == 0) direction = -grad;
    const double slope = grad.dot(direction);

    double step = 1.0;
    Eigen::VectorXd trial;
    double f_trial = 0.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      trial = x + step * direction;
      f_trial = f(trial, trial_grad, trial_hessian);
      if (std::isfinite(f_trial) && f_trial <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable descent left along a descent direction.
      result.converged = true;
      break;
    }

    const double improvement = fx - f_trial;
    x = trial;
    fx = f_trial;
    grad = trial_grad;
    hessian = trial_hessian;

    // Improvements at rounding level of f count as stalls.
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(fx);
    stalled = improvement < std::max(options.f_tolerance, floor) ? stalled + 1 : 0;
    if (stalled >= options.stall_iterations) {
      result.converged = true;
      ++it;
      break;
    }
  }
  result.x = x;
  result.value = fx;
  result.iterations = it;
  return result;
}

}  // namespace sagnac::detail
