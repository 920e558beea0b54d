#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sagnac/errors.hpp"
#include "sagnac/source.hpp"
#include "sagnac/tomography.hpp"

using namespace sagnac;
using doctest::Approx;

namespace {

TomoCounts poisson_counts(const TomoCounts& mean, std::mt19937_64& rng) {
  TomoCounts out = mean;
  for (double& n : out.counts) {
    std::poisson_distribution<long long> p(n);
    n = static_cast<double>(p(rng));
  }
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// Eigenvalue clipping of a Hermitian unit-trace matrix onto the physical set.
DensityMatrix clipped(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho.matrix());
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  ev /= ev.sum();
  Matrix4c m = es.eigenvectors() * ev.cast<Complex>().asDiagonal() *
               es.eigenvectors().adjoint();
  m = 0.5 * (m + m.adjoint()).eval();
  return DensityMatrix(m);
}

const PureState kPsi = make_bell_psi_minus();

}  // namespace

TEST_CASE("standard settings") {
  const TomoSettings s = standard_tomo_settings();
  REQUIRE(s.settings.size() == 16);
  CHECK(s.condition_number < 20.0);

  // Independent condition number from the 16x16 probability map.
  Eigen::Matrix<std::complex<double>, 16, 16> map;
  for (int k = 0; k < 16; ++k) {
    const auto& st = s.settings[static_cast<std::size_t>(k)];
    const Ket2 a = st.a.ket();
    const Ket2 b = st.b.ket();
    Ket4 v;
    v << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
    const Matrix4c proj = v * v.adjoint();
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) map(k, 4 * i + j) = proj(j, i);
    }
  }
  Eigen::JacobiSVD<Eigen::Matrix<std::complex<double>, 16, 16>> svd(map);
  const auto sv = svd.singularValues();
  CHECK(s.condition_number == Approx(sv(0) / sv(15)).epsilon(1e-9));
  CHECK(s.condition_number == Approx(10.4039).epsilon(1e-5));

  const std::size_t hv = s.index_of("H", "V");
  const TomoCounts e = expected_tomo_counts(DensityMatrix::from_pure(kPsi), s, 1000.0);
  CHECK(e.counts[hv] == Approx(500.0));
  CHECK_THROWS_AS(s.index_of("H", "X"), InputError);
}

TEST_CASE("incomplete settings are rejected") {
  std::vector<TomoSetting> list = standard_tomo_settings().settings;
  list[5] = list[4];
  CHECK_THROWS_AS(make_tomo_settings(list), InputError);
  list.pop_back();
  CHECK_THROWS_AS(make_tomo_settings(list), InputError);
}

TEST_CASE("linear inversion round trips") {
  const TomoSettings s = standard_tomo_settings();
  const DensityMatrix psi = DensityMatrix::from_pure(kPsi);
  const DensityMatrix back = linear_inversion(expected_tomo_counts(psi, s, 1e4), s);
  CHECK(back.unconstrained());
  CHECK((back.matrix() - psi.matrix()).norm() < 1e-10);

  std::mt19937_64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const DensityMatrix rho = i % 2 ? oracle::random_mixed(rng)
                                    : DensityMatrix::from_pure(oracle::random_pure(rng));
    const DensityMatrix est = linear_inversion(expected_tomo_counts(rho, s, 3.7e3), s);
    REQUIRE((est.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("noisy linear inversion is usually unphysical") {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts mean = expected_tomo_counts(DensityMatrix::from_pure(kPsi), s, 1e4);
  std::mt19937_64 rng(32);
  int negative = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    if (linear_inversion(poisson_counts(mean, rng), s).min_eigenvalue() < 0.0) ++negative;
  }
  CHECK(negative > trials / 2);
}

TEST_CASE("maximum likelihood") {
  const TomoSettings s = standard_tomo_settings();
  const DensityMatrix psi = DensityMatrix::from_pure(kPsi);
  const MleResult exact = mle_reconstruct(expected_tomo_counts(psi, s, 1e4), s);
  CHECK(fidelity_to_pure(exact.state, kPsi) >= 1.0 - 1e-9);

  std::mt19937_64 rng(33);
  for (int i = 0; i < 50; ++i) {
    const DensityMatrix rho = oracle::random_mixed(rng);
    const TomoCounts counts = expected_tomo_counts(rho, s, 1e4);
    const MleResult fit = mle_reconstruct(counts, s);
    CHECK(fit.state.trace_distance(linear_inversion(counts, s)) < 1e-6);
  }

  const TomoCounts mean = expected_tomo_counts(psi, s, 2e4);
  for (int i = 0; i < 100; ++i) {
    const TomoCounts counts = poisson_counts(mean, rng);
    const MleResult fit = mle_reconstruct(counts, s);
    REQUIRE_FALSE(fit.state.unconstrained());
    REQUIRE(fit.state.min_eigenvalue() >= kEigenvalueFloor);
    REQUIRE(std::abs(fit.state.matrix().trace().real() - 1.0) < 1e-12);
    const DensityMatrix projected = clipped(linear_inversion(counts, s));
    REQUIRE(fit.log_likelihood >= log_likelihood(projected, counts, s) - 1e-9);
    REQUIRE(fit.log_likelihood == Approx(log_likelihood(fit.state, counts, s)).epsilon(1e-12));
  }

  TomoCounts zeros;
  CHECK_THROWS_AS(mle_reconstruct(zeros, s), InputError);
}

TEST_CASE("MLE fidelity depends on the count level") {
  const TomoSettings s = standard_tomo_settings();
  const DensityMatrix psi = DensityMatrix::from_pure(kPsi);
  std::mt19937_64 rng(34);
  auto median_fidelity = [&](double per_setting) {
    const TomoCounts mean = expected_tomo_counts(psi, s, per_setting);
    std::vector<double> f;
    for (int t = 0; t < 200; ++t) {
      f.push_back(fidelity_to_pure(mle_reconstruct(poisson_counts(mean, rng), s).state, kPsi));
    }
    return median(f);
  };
  const double high = median_fidelity(1e4);
  const double low = median_fidelity(1e2);
  CHECK(high >= 0.999);
  CHECK(low < high - 1e-3);
}

TEST_CASE("Monte-Carlo metrics") {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts exact = expected_tomo_counts(DensityMatrix::from_pure(kPsi), s, 1e4);
  MonteCarloOptions opts;
  opts.trials = 100;
  opts.resample = false;
  const MonteCarloMetrics fixed = monte_carlo_metrics(exact, s, opts);
  for (double f : fixed.fidelity) REQUIRE(f == Approx(1.0).epsilon(1e-9));

  opts.trials = 99;
  CHECK_THROWS_AS(monte_carlo_metrics(exact, s, opts), InputError);

  SourceParams params;
  params.balance = 1.03;
  params.crystal_offset_mm = 1.0;
  const DensityMatrix rho = combined_source_state(params);
  opts.trials = 400;
  opts.resample = true;
  opts.seed = 7;
  const MonteCarloMetrics low = monte_carlo_metrics(expected_tomo_counts(rho, s, 1e4), s, opts);
  const MonteCarloMetrics high = monte_carlo_metrics(expected_tomo_counts(rho, s, 1e6), s, opts);
  CHECK(high.failed_trials == 0);
  CHECK(high.concurrence_summary.stddev > 3e-5);
  CHECK(high.concurrence_summary.stddev < 3e-4);
  const double ratio = low.concurrence_summary.stddev / high.concurrence_summary.stddev;
  CHECK(ratio > 7.0);
  CHECK(ratio < 13.0);
}

TEST_CASE("Monte-Carlo metrics do not depend on the thread count") {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts counts = expected_tomo_counts(DensityMatrix::from_pure(kPsi), s, 5e3);
  MonteCarloOptions opts;
  opts.trials = 150;
  opts.seed = 99;
  setenv("SAGNAC_THREADS", "1", 1);
  const MonteCarloMetrics serial = monte_carlo_metrics(counts, s, opts);
  setenv("SAGNAC_THREADS", "4", 1);
  const MonteCarloMetrics threaded = monte_carlo_metrics(counts, s, opts);
  unsetenv("SAGNAC_THREADS");
  CHECK(serial.fidelity == threaded.fidelity);
  CHECK(serial.concurrence == threaded.concurrence);
  CHECK(serial.s_magnitude == threaded.s_magnitude);

  opts.seed = 100;
  CHECK(monte_carlo_metrics(counts, s, opts).fidelity != serial.fidelity);
}
