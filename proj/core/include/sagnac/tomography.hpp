#pragma once

// Two-qubit state tomography from 16 product projections: linear inversion,
// maximum-likelihood reconstruction and Monte-Carlo metric distributions.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sagnac/qstate.hpp"

namespace sagnac {

struct TomoSetting {
  std::string label_a;
  std::string label_b;
  Projector1Q a;
  Projector1Q b;
};

struct TomoSettings {
  std::vector<TomoSetting> settings;
  /// 2-norm condition number of the 16x16 map from Pauli coefficients to
  /// expected counts.
  double condition_number = 0.0;

  /// Index of the (label_a, label_b) pair; throws InputError if absent.
  std::size_t index_of(const std::string& label_a, const std::string& label_b) const;
};

/// Builds the set from explicit projectors; throws InputError unless it is
/// tomographically complete.
TomoSettings make_tomo_settings(std::vector<TomoSetting> settings);

/// {H, V, D, R} x {H, V, D, R} with D = (H + V)/sqrt(2), R = (H + iV)/sqrt(2).
/// Ordered with the A label outermost.
TomoSettings standard_tomo_settings();

struct TomoCounts {
  std::array<double, 16> counts{};
  double flux = 0.0;  ///< expected pairs per setting (N tau)

  void validate() const;
  double total() const;
};

TomoCounts expected_tomo_counts(const DensityMatrix& rho, const TomoSettings& settings,
                                double flux);

/// Hermitian unit-trace solution of the linear count equations. May carry
/// negative eigenvalues; the result is tagged Unconstrained.
DensityMatrix linear_inversion(const TomoCounts& counts, const TomoSettings& settings);

/// Poisson log-likelihood sum n_i log q_i - q_i of the counts under rho,
/// with the free overall rate at its optimum.
double log_likelihood(const DensityMatrix& rho, const TomoCounts& counts,
                      const TomoSettings& settings);

struct MleResult {
  DensityMatrix state;
  double log_likelihood = 0.0;
  int iterations = 0;
};

/// Maximum-likelihood estimate over physical states, rho = T^dagger T / Tr
/// with T upper triangular. Throws ConvergenceError after the iteration cap.
MleResult mle_reconstruct(const TomoCounts& counts, const TomoSettings& settings);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MonteCarloMetrics {
  std::vector<double> fidelity;      ///< to Psi-
  std::vector<double> concurrence;
  std::vector<double> s_magnitude;   ///< |S| at canonical angles
  MetricSummary fidelity_summary;
  MetricSummary concurrence_summary;
  MetricSummary s_summary;
  int failed_trials = 0;
};

struct MonteCarloOptions {
  int trials = 1000;
  std::uint64_t seed = 0;
  bool resample = true;  ///< false reconstructs the input counts every trial
};

/// Resamples each count as Poisson(n), reconstructs by MLE and collects the
/// metrics. Trials are keyed by (seed, trial index). Throws InputError for
/// fewer than 100 trials and ConvergenceError when more than 1% fail.
MonteCarloMetrics monte_carlo_metrics(const TomoCounts& counts, const TomoSettings& settings,
                                      const MonteCarloOptions& options);

MetricSummary summarize(const std::vector<double>& values);

}  // namespace sagnac
