#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sagnac/chsh.hpp"
#include "sagnac/errors.hpp"
#include "sagnac/io.hpp"
#include "sagnac/source.hpp"

using namespace sagnac;
using doctest::Approx;
using oracle::kPi;

namespace {

const std::string kCountTable = std::string(SAGNAC_DATA_DIR) + "/chsh_counts.csv";

CountGrid psi_minus_grid(double flux) {
  const ChshAngles c = ChshAngles::canonical();
  return expected_count_grid(DensityMatrix::from_pure(make_bell_psi_minus()),
                             CountGrid::settings_for(c.alpha[0], c.alpha[1]),
                             CountGrid::settings_for(c.beta[0], c.beta[2]), flux);
}

// Numerical gradient of E with respect to the four counts, scaled by sqrt(n).
double finite_difference_delta_e(double pp, double pm, double mp, double mm) {
  auto e = [](double a, double b, double c, double d) { return (a - b - c + d) / (a + b + c + d); };
  const double n[4] = {pp, pm, mp, mm};
  double var = 0.0;
  for (int i = 0; i < 4; ++i) {
    double up[4] = {pp, pm, mp, mm};
    double dn[4] = {pp, pm, mp, mm};
    const double h = 1e-4 * n[i];
    up[i] += h;
    dn[i] -= h;
    const double d = (e(up[0], up[1], up[2], up[3]) - e(dn[0], dn[1], dn[2], dn[3])) / (2 * h);
    var += d * d * n[i];
  }
  return std::sqrt(var);
}

}  // namespace

TEST_CASE("correlation from a quadruple") {
  const Correlation perfect = correlation_from_quadruple(500, 0, 0, 500);
  CHECK(perfect.e == 1.0);
  CHECK(perfect.delta_e == 0.0);

  for (double k : {1.0, 25.0, 1e4, 7.3e6}) {
    const Correlation flat = correlation_from_quadruple(k, k, k, k);
    CHECK(flat.e == 0.0);
    CHECK(flat.delta_e == Approx(1.0 / (2.0 * std::sqrt(k))).epsilon(1e-12));
  }

  const Correlation a2 = correlation_from_quadruple(431677, 2567446, 2686277, 460054);
  CHECK(a2.e == Approx(-0.70979).epsilon(1e-5));
  CHECK(a2.delta_e ==
        Approx(finite_difference_delta_e(431677, 2567446, 2686277, 460054)).epsilon(1e-6));

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(100.0, 1e6);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    REQUIRE(correlation_from_quadruple(a, b, c, d).delta_e ==
            Approx(finite_difference_delta_e(a, b, c, d)).epsilon(1e-6));
  }

  CHECK_THROWS_AS(correlation_from_quadruple(0, 0, 0, 0), InputError);
}

TEST_CASE("S from the bundled count table") {
  const CountGrid grid = parse_count_table(std::filesystem::path(kCountTable));
  const SResult r = s_from_count_grid(grid);
  CHECK(r.total_counts == 24602439.0);
  CHECK(r.magnitude() == Approx(2.82278).epsilon(2e-6));
  CHECK(r.delta_s == Approx(5.7e-4).epsilon(0.01));
  CHECK(r.tsirelson_gap() == Approx(5.65e-3).epsilon(1e-3));
  CHECK(r.s == r.e[0] + r.e[1] - r.e[2] + r.e[3]);
  for (double e : r.e) CHECK(std::abs(e) == Approx(0.7).epsilon(0.03));
}

TEST_CASE("uniform and exact grids") {
  CountGrid flat;
  flat.counts.setConstant(1000.0);
  CHECK(s_from_count_grid(flat).s == 0.0);

  const SResult exact = s_from_count_grid(psi_minus_grid(1e6));
  CHECK(std::abs(exact.magnitude() - kTsirelson) < 1e-9);
  CHECK(exact.delta_s == Approx(oracle::singlet_delta_s(1e6)).epsilon(1e-9));
  CHECK(exact.delta_s == Approx(1.414e-3).epsilon(1e-3));

  CountGrid zeros;
  zeros.counts.setZero();
  CHECK_THROWS_AS(s_from_count_grid(zeros), InputError);
}

TEST_CASE("S of states") {
  const ChshAngles c = ChshAngles::canonical();
  const double psi = s_of_state(DensityMatrix::from_pure(make_bell_psi_minus()), c);
  CHECK(psi < 0.0);
  CHECK(std::abs(std::abs(psi) - kTsirelson) < 1e-12);
  CHECK(std::abs(s_of_state(DensityMatrix::basis_state(ProductBasis::HV), c)) ==
        Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(kTsirelson - std::abs(s_of_state(DensityMatrix::from_pure(balance_state(1.03)), c)) ==
        Approx(6.4e-4).epsilon(0.01));
}

TEST_CASE("Tsirelson and local bounds") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, kPi);
  auto random_angles = [&] {
    return ChshAngles::from_directions(u(rng), u(rng), u(rng), u(rng));
  };
  for (int i = 0; i < 1000; ++i) {
    const DensityMatrix rho = i % 2 ? oracle::random_mixed(rng)
                                    : DensityMatrix::from_pure(oracle::random_pure(rng));
    REQUIRE(std::abs(s_of_state(rho, random_angles())) <= kTsirelson + 1e-9);
  }
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(std::abs(s_of_state(oracle::random_product(rng), random_angles())) <= 2.0 + 1e-9);
  }
}

TEST_CASE("count-grid S equals state S on exact expected counts") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, kPi);
  for (int i = 0; i < 200; ++i) {
    const DensityMatrix rho = oracle::random_mixed(rng);
    const double a = u(rng), a2 = u(rng), b = u(rng), b2 = u(rng);
    const CountGrid grid = expected_count_grid(rho, CountGrid::settings_for(a, a2),
                                               CountGrid::settings_for(b, b2), 1e5);
    REQUIRE(std::abs(s_from_count_grid(grid).s -
                     s_of_state(rho, ChshAngles::from_directions(a, a2, b, b2))) < 1e-9);
  }
}

TEST_CASE("closed-form delta S matches Poisson resampling") {
  const CountGrid mean = psi_minus_grid(4e4);
  const double predicted = s_from_count_grid(mean).delta_s;
  std::mt19937_64 rng(14);
  const int trials = 10000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    CountGrid g = mean;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        std::poisson_distribution<long long> p(mean.counts(i, j));
        g.counts(i, j) = static_cast<double>(p(rng));
      }
    }
    const double s = s_from_count_grid(g).s;
    sum += s;
    sum2 += s * s;
  }
  const double m = sum / trials;
  const double sd = std::sqrt((sum2 - trials * m * m) / (trials - 1));
  CHECK(sd == Approx(predicted).epsilon(0.05));
}

TEST_CASE("angle optimization") {
  const OptimizedAngles psi = optimize_angles(DensityMatrix::from_pure(make_bell_psi_minus()));
  CHECK(psi.s_max == Approx(kTsirelson).epsilon(1e-10));
  const OptimizedAngles mixed = optimize_angles(DensityMatrix::maximally_mixed());
  CHECK(mixed.s_max < 1e-9);

  // Oracle: for fixed a, a' the best b, b' give |T^T(r_a + r_a')| + |T^T(r_a' - r_a)|.
  const DensityMatrix rho = DensityMatrix::from_pure(balance_state(1.2));
  const Eigen::Matrix2d t = oracle::zx_correlation_tensor(rho);
  double grid_best = 0.0;
  const double step = 0.1 * oracle::kDeg;
  for (int i = 0; i < 1800; ++i) {
    const Eigen::Vector2d ra(std::cos(2 * i * step), std::sin(2 * i * step));
    for (int j = 0; j < 1800; ++j) {
      const Eigen::Vector2d ra2(std::cos(2 * j * step), std::sin(2 * j * step));
      grid_best = std::max(grid_best, (t.transpose() * (ra + ra2)).norm() +
                                          (t.transpose() * (ra2 - ra)).norm());
    }
  }
  const double canonical = std::abs(s_of_state(rho, ChshAngles::canonical()));
  const OptimizedAngles opt = optimize_angles(rho);
  CHECK(opt.s_max > canonical + 1e-5);
  CHECK(opt.s_max >= grid_best - 1e-9);
  CHECK(opt.s_max <= grid_best + 1e-4);
  CHECK(std::abs(s_of_state(rho, opt.angles)) == Approx(opt.s_max).epsilon(1e-12));
}
