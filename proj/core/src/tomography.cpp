#include "sagnac/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <unsupported/Eigen/KroneckerProduct>

#include "minimize.hpp"
#include "parallel.hpp"
#include "sagnac/chsh.hpp"
#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

using Matrix16d = Eigen::Matrix<double, 16, 16>;
using Vector16d = Eigen::Matrix<double, 16, 1>;

std::array<Matrix2c, 4> paulis() {
  Matrix2c i2 = Matrix2c::Identity();
  Matrix2c x;
  x << 0.0, 1.0, 1.0, 0.0;
  Matrix2c y;
  y << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  Matrix2c z;
  z << 1.0, 0.0, 0.0, -1.0;
  return {i2, x, y, z};
}

// Gamma_k = sigma_{k/4} x sigma_{k%4}; rho = 1/4 sum_k x_k Gamma_k.
const std::array<Matrix4c, 16>& pauli_products() {
  static const std::array<Matrix4c, 16> basis = [] {
    std::array<Matrix4c, 16> out;
    const auto p = paulis();
    for (int k = 0; k < 16; ++k) out[k] = Eigen::kroneckerProduct(p[k / 4], p[k % 4]).eval();
    return out;
  }();
  return basis;
}

std::vector<Matrix4c> joint_projectors(const TomoSettings& settings) {
  std::vector<Matrix4c> out;
  out.reserve(settings.settings.size());
  for (const auto& s : settings.settings) {
    out.push_back(Eigen::kroneckerProduct(s.a.matrix(), s.b.matrix()).eval());
  }
  return out;
}

Matrix16d measurement_matrix(const std::vector<Matrix4c>& projectors) {
  const auto& gamma = pauli_products();
  Matrix16d b;
  for (int m = 0; m < 16; ++m) {
    for (int k = 0; k < 16; ++k) b(m, k) = 0.25 * (projectors[m] * gamma[k]).trace().real();
  }
  return b;
}

// Closest density matrix in 2-norm with the same eigenvectors; negative
// weight is spread evenly over the remaining eigenvalues.
Matrix4c project_to_physical(const Matrix4c& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> solver(rho);
  Eigen::Vector4d mu = solver.eigenvalues() / solver.eigenvalues().sum();  // ascending
  Eigen::Vector4d lambda = Eigen::Vector4d::Zero();
  double carried = 0.0;
  int i = 0;
  for (; i < 4; ++i) {
    const double remaining = static_cast<double>(4 - i);
    if (mu(i) + carried / remaining >= 0.0) break;
    carried += mu(i);
  }
  for (int j = i; j < 4; ++j) lambda(j) = mu(j) + carried / static_cast<double>(4 - i);
  return solver.eigenvectors() * lambda.asDiagonal() * solver.eigenvectors().adjoint();
}

// Poisson deviance-form log-likelihood: sum n log(q/n) - (q - n). Zero when
// q matches n everywhere.
double extended_log_likelihood(const std::array<double, 16>& n, const std::array<double, 16>& q) {
  double ll = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    if (n[i] > 0.0) {
      if (!(q[i] > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += n[i] * std::log(q[i] / n[i]);
    }
    ll -= q[i] - n[i];
  }
  return ll;
}

Matrix4c upper_from_params(const Eigen::VectorXd& x) {
  Matrix4c t = Matrix4c::Zero();
  int k = 0;
  for (int r = 0; r < 4; ++r) t(r, r) = x(k++);
  for (int r = 0; r < 4; ++r) {
    for (int c = r + 1; c < 4; ++c) {
      t(r, c) = Complex(x(k), x(k + 1));
      k += 2;
    }
  }
  return t;
}

Eigen::VectorXd params_from_upper(const Matrix4c& t) {
  Eigen::VectorXd x(16);
  int k = 0;
  for (int r = 0; r < 4; ++r) x(k++) = t(r, r).real();
  for (int r = 0; r < 4; ++r) {
    for (int c = r + 1; c < 4; ++c) {
      x(k++) = t(r, c).real();
      x(k++) = t(r, c).imag();
    }
  }
  return x;
}

Matrix4c normalized(const Matrix4c& a) {
  Matrix4c rho = a / a.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

}  // namespace

std::size_t TomoSettings::index_of(const std::string& label_a, const std::string& label_b) const {
  for (std::size_t i = 0; i < settings.size(); ++i) {
    if (settings[i].label_a == label_a && settings[i].label_b == label_b) return i;
  }
  throw InputError("no tomography setting labelled (" + label_a + ", " + label_b + ")");
}

TomoSettings make_tomo_settings(std::vector<TomoSetting> settings) {
  if (settings.size() != 16) {
    throw InputError("tomography needs exactly 16 settings, got " +
                     std::to_string(settings.size()));
  }
  TomoSettings out{std::move(settings), 0.0};
  Eigen::JacobiSVD<Matrix16d> svd(measurement_matrix(joint_projectors(out)));
  const auto& sv = svd.singularValues();
  if (!(sv(15) > 1e-10 * sv(0))) {
    throw InputError("tomography settings are not tomographically complete");
  }
  out.condition_number = sv(0) / sv(15);
  return out;
}

TomoSettings standard_tomo_settings() {
  const double r = 1.0 / std::sqrt(2.0);
  const std::array<std::pair<const char*, Ket2>, 4> kets{{
      {"H", Ket2(1.0, 0.0)},
      {"V", Ket2(0.0, 1.0)},
      {"D", Ket2(r, r)},
      {"R", Ket2(r, Complex(0.0, r))},
  }};
  std::vector<TomoSetting> list;
  for (const auto& [la, ka] : kets) {
    for (const auto& [lb, kb] : kets) {
      list.push_back({la, lb, Projector1Q::from_ket(ka), Projector1Q::from_ket(kb)});
    }
  }
  return make_tomo_settings(std::move(list));
}

void TomoCounts::validate() const {
  for (double n : counts) {
    if (!std::isfinite(n) || n < 0.0) throw InputError("tomography counts must be non-negative");
  }
}

double TomoCounts::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

TomoCounts expected_tomo_counts(const DensityMatrix& rho, const TomoSettings& settings,
                                double flux) {
  TomoCounts out;
  out.flux = flux;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto& s = settings.settings[i];
    out.counts[i] = flux * born_probability(rho, s.a, s.b);
  }
  return out;
}

DensityMatrix linear_inversion(const TomoCounts& counts, const TomoSettings& settings) {
  counts.validate();
  const Matrix16d b = measurement_matrix(joint_projectors(settings));
  Vector16d n;
  for (int i = 0; i < 16; ++i) n(i) = counts.counts[static_cast<std::size_t>(i)];
  Eigen::FullPivLU<Matrix16d> lu(b);
  if (!lu.isInvertible()) throw InputError("tomography measurement matrix is singular");
  const Vector16d x = lu.solve(n);
  if (!(x(0) > 0.0)) throw InputError("linear inversion produced a non-positive trace");
  const auto& gamma = pauli_products();
  Matrix4c rho = Matrix4c::Zero();
  for (int k = 0; k < 16; ++k) rho += 0.25 * x(k) * gamma[k];
  return DensityMatrix(normalized(rho), DensityMatrix::Constraint::Unconstrained);
}

double log_likelihood(const DensityMatrix& rho, const TomoCounts& counts,
                      const TomoSettings& settings) {
  counts.validate();
  const auto projectors = joint_projectors(settings);
  std::array<double, 16> p{};
  double p_sum = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    p[i] = std::max(0.0, (projectors[i] * rho.matrix()).trace().real());
    p_sum += p[i];
  }
  const double scale = counts.total() / p_sum;
  for (double& v : p) v *= scale;
  return extended_log_likelihood(counts.counts, p);
}

MleResult mle_reconstruct(const TomoCounts& counts, const TomoSettings& settings) {
  counts.validate();
  const double total = counts.total();
  if (!(total > 0.0)) throw InputError("tomography counts are all zero");

  const auto projectors = joint_projectors(settings);
  Matrix4c sum_projectors = Matrix4c::Zero();
  for (const auto& p : projectors) sum_projectors += p;

  const DensityMatrix linear = linear_inversion(counts, settings);
  const DensityMatrix projected(normalized(project_to_physical(linear.matrix())));
  const double projected_ll = log_likelihood(projected, counts, settings);

  // Start slightly inside the physical set so the Cholesky factor exists.
  const Matrix4c start =
      (1.0 - 1e-3) * projected.matrix() + 1e-3 * 0.25 * Matrix4c::Identity();
  // The rate matrix is kappa T^dagger T; kappa puts T at unit scale.
  const double kappa = total / (sum_projectors * start).trace().real();
  // The factor lives in a basis ordered by diagonal pivoting, so near-empty
  // populations come last instead of becoming tiny leading pivots.
  const Eigen::LDLT<Matrix4c> pivoting(start);
  const Eigen::PermutationMatrix<4> perm(pivoting.transpositionsP());
  Eigen::LLT<Matrix4c> chol(perm * start * perm.transpose());
  const Matrix4c t0 = chol.matrixL().adjoint();
  std::vector<Matrix4c> permuted;
  for (const auto& p : projectors) permuted.push_back(perm * p * perm.transpose());

  // q_i = x^T A_i x with A_i(k, l) = kappa Re Tr(P_i E_k^dagger E_l), E_k the
  // factor built from the k-th unit parameter vector.
  std::array<Matrix4c, 16> unit{};
  for (int k = 0; k < 16; ++k) unit[k] = upper_from_params(Eigen::VectorXd::Unit(16, k));
  std::array<Matrix16d, 16> forms{};
  for (std::size_t i = 0; i < 16; ++i) {
    for (int k = 0; k < 16; ++k) {
      const Matrix4c left = permuted[i] * unit[k].adjoint();
      for (int l = k; l < 16; ++l) {
        forms[i](k, l) = kappa * (left * unit[l]).trace().real();
        forms[i](l, k) = forms[i](k, l);
      }
    }
  }

  // Minimizes -LL with its exact gradient and Hessian.
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    std::array<double, 16> q{};
    grad = Eigen::VectorXd::Zero(16);
    hess = Eigen::MatrixXd::Zero(16, 16);
    for (std::size_t i = 0; i < 16; ++i) {
      const Vector16d dq = 2.0 * forms[i] * x;
      q[i] = 0.5 * x.dot(dq);
      const double n = counts.counts[i];
      const double ratio = n > 0.0 ? n / q[i] : 0.0;
      grad -= (ratio - 1.0) * dq;
      hess -= 2.0 * (ratio - 1.0) * forms[i];
      if (n > 0.0) hess += (ratio / q[i]) * dq * dq.transpose();
    }
    const double ll = extended_log_likelihood(counts.counts, q);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  detail::NewtonOptions opts;
  opts.f_tolerance = 1e-10;
  const auto result = detail::damped_newton(objective, params_from_upper(t0), opts);
  const Matrix4c t = upper_from_params(result.x);
  const DensityMatrix estimate(normalized(perm.transpose() * (t.adjoint() * t) * perm));
  const double estimate_ll = log_likelihood(estimate, counts, settings);

  if (!result.converged) {
    throw ConvergenceError("maximum-likelihood reconstruction hit the iteration cap after " +
                               std::to_string(result.iterations) + " iterations",
                           result.value);
  }
  if (projected_ll >= estimate_ll) return MleResult{projected, projected_ll, result.iterations};
  return MleResult{estimate, estimate_ll, result.iterations};
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

MonteCarloMetrics monte_carlo_metrics(const TomoCounts& counts, const TomoSettings& settings,
                                      const MonteCarloOptions& options) {
  if (options.trials < 100) {
    throw InputError("Monte-Carlo metrics need at least 100 trials, got " +
                     std::to_string(options.trials));
  }
  counts.validate();
  const auto trials = static_cast<std::size_t>(options.trials);
  const PureState target = make_bell_psi_minus();
  const ChshAngles angles = ChshAngles::canonical();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::array<double, 3>> rows(trials, {nan, nan, nan});
  detail::parallel_for(trials, [&](std::size_t trial) {
    TomoCounts sample = counts;
    if (options.resample) {
      auto rng = detail::make_stream(options.seed, {static_cast<std::uint64_t>(trial)});
      for (double& n : sample.counts) n = detail::poisson(rng, n);
    }
    try {
      const MleResult fit = mle_reconstruct(sample, settings);
      rows[trial] = {fidelity_to_pure(fit.state, target), concurrence(fit.state),
                     std::abs(s_of_state(fit.state, angles))};
    } catch (const ConvergenceError&) {
      // counted below
    }
  });

  MonteCarloMetrics out;
  for (const auto& row : rows) {
    if (std::isnan(row[0])) {
      ++out.failed_trials;
      continue;
    }
    out.fidelity.push_back(row[0]);
    out.concurrence.push_back(row[1]);
    out.s_magnitude.push_back(row[2]);
  }
  if (static_cast<double>(out.failed_trials) > 0.01 * static_cast<double>(trials)) {
    throw ConvergenceError(std::to_string(out.failed_trials) + " of " + std::to_string(trials) +
                               " Monte-Carlo reconstructions failed to converge",
                           static_cast<double>(out.failed_trials));
  }
  out.fidelity_summary = summarize(out.fidelity);
  out.concurrence_summary = summarize(out.concurrence);
  out.s_summary = summarize(out.s_magnitude);
  return out;
}

}  // namespace sagnac
