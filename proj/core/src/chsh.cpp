#include "sagnac/chsh.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "minimize.hpp"
#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

constexpr double kPi = std::numbers::pi;

// (row offset, column offset) of the A and B settings used by E_i.
constexpr std::array<std::array<int, 2>, 4> kQuadrupleOrigin{{{0, 0}, {2, 0}, {0, 2}, {2, 2}}};
constexpr std::array<double, 4> kSign{1.0, 1.0, -1.0, 1.0};

double correlation_from_probabilities(const DensityMatrix& rho, double alpha, double beta) {
  const Projector1Q a = linear_projector(alpha);
  const Projector1Q a_perp = linear_projector(alpha + 0.5 * kPi);
  const Projector1Q b = linear_projector(beta);
  const Projector1Q b_perp = linear_projector(beta + 0.5 * kPi);
  const double pp = born_probability(rho, a, b);
  const double pm = born_probability(rho, a, b_perp);
  const double mp = born_probability(rho, a_perp, b);
  const double mm = born_probability(rho, a_perp, b_perp);
  const double d = pp + pm + mp + mm;
  return d > 0.0 ? (pp - pm - mp + mm) / d : 0.0;
}

}  // namespace

ChshAngles ChshAngles::canonical() {
  return from_directions(0.0, 0.25 * kPi, 0.125 * kPi, 0.375 * kPi);
}

ChshAngles ChshAngles::from_directions(double a, double a_prime, double b, double b_prime) {
  ChshAngles out;
  out.alpha = {a, a_prime, a, a_prime};
  out.beta = {b, b, b_prime, b_prime};
  return out;
}

void CountGrid::validate() const {
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double n = counts(i, j);
      if (!std::isfinite(n) || n < 0.0) {
        throw InputError("count grid cell (" + std::to_string(i) + ", " + std::to_string(j) +
                         ") is negative or not finite");
      }
    }
  }
}

std::array<PlateSetting, 4> CountGrid::settings_for(double primary, double secondary) {
  const auto hwp = PlateCalibration::ideal_half_wave();
  const auto qwp = PlateCalibration::ideal_quarter_wave();
  std::array<PlateSetting, 4> out;
  const std::array<double, 4> angles{primary, primary + 0.5 * kPi, secondary,
                                     secondary + 0.5 * kPi};
  for (std::size_t k = 0; k < 4; ++k) {
    out[k] = plates_for_linear_projection(angles[k], hwp, qwp).setting;
  }
  return out;
}

double SResult::magnitude() const { return std::abs(s); }

double SResult::tsirelson_gap() const { return kTsirelson - magnitude(); }

Correlation correlation_from_quadruple(double n_pp, double n_pm, double n_mp, double n_mm) {
  for (double n : {n_pp, n_pm, n_mp, n_mm}) {
    if (!std::isfinite(n) || n < 0.0) throw InputError("counts must be non-negative");
  }
  const double d = n_pp + n_pm + n_mp + n_mm;
  if (!(d > 0.0)) throw InputError("correlation needs at least one non-zero count");
  Correlation out;
  out.e = (n_pp - n_pm - n_mp + n_mm) / d;
  out.delta_e = 2.0 / std::pow(d, 1.5) * std::sqrt((n_pp + n_mm) * (n_pm + n_mp));
  return out;
}

SResult s_from_count_grid(const CountGrid& grid) {
  grid.validate();
  SResult out;
  double variance = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const int r = kQuadrupleOrigin[i][0];
    const int c = kQuadrupleOrigin[i][1];
    const auto& n = grid.counts;
    Correlation corr;
    try {
      corr = correlation_from_quadruple(n(r, c), n(r, c + 1), n(r + 1, c), n(r + 1, c + 1));
    } catch (const InputError&) {
      throw InputError("quadruple for E_" + std::to_string(i) + " has no counts");
    }
    out.e[i] = corr.e;
    out.delta_e[i] = corr.delta_e;
    out.s += kSign[i] * corr.e;
    variance += corr.delta_e * corr.delta_e;
  }
  out.delta_s = std::sqrt(variance);
  out.total_counts = grid.total();
  return out;
}

double s_of_state(const DensityMatrix& rho, const ChshAngles& angles) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    s += kSign[i] * correlation_from_probabilities(rho, angles.alpha[i], angles.beta[i]);
  }
  return s;
}

CountGrid expected_count_grid(const DensityMatrix& rho, const std::array<PlateSetting, 4>& a,
                              const std::array<PlateSetting, 4>& b, double flux) {
  CountGrid grid;
  grid.a_settings = a;
  grid.b_settings = b;
  for (std::size_t i = 0; i < 4; ++i) {
    const Projector1Q ma = projector_from_plates(a[i]);
    for (std::size_t j = 0; j < 4; ++j) {
      grid.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          flux * born_probability(rho, ma, projector_from_plates(b[j]));
    }
  }
  return grid;
}

OptimizedAngles optimize_angles(const DensityMatrix& rho) {
  auto loss = [&](const Eigen::VectorXd& x) {
    return -std::abs(s_of_state(rho, ChshAngles::from_directions(x(0), x(1), x(2), x(3))));
  };

  const ChshAngles canonical = ChshAngles::canonical();
  OptimizedAngles best{canonical, std::abs(s_of_state(rho, canonical))};

  // The canonical start plus rotated and mirrored copies; |S| has many
  // equivalent optima and a few saddles.
  const std::array<std::array<double, 4>, 6> starts{{
      {0.0, 0.25 * kPi, 0.125 * kPi, 0.375 * kPi},
      {0.0, 0.25 * kPi, -0.125 * kPi, -0.375 * kPi},
      {0.0, -0.25 * kPi, 0.125 * kPi, -0.125 * kPi},
      {0.1 * kPi, 0.35 * kPi, 0.2 * kPi, 0.45 * kPi},
      {0.2 * kPi, -0.05 * kPi, 0.3 * kPi, 0.1 * kPi},
      {0.05 * kPi, 0.3 * kPi, 0.4 * kPi, 0.15 * kPi},
  }};
  detail::NelderMeadOptions opts;
  opts.initial_step = 0.1;
  opts.x_tolerance = 1e-10;
  opts.f_tolerance = 1e-15;
  bool any_converged = false;
  for (const auto& s : starts) {
    Eigen::VectorXd x(4);
    x << s[0], s[1], s[2], s[3];
    const auto r = detail::nelder_mead(loss, x, opts);
    any_converged = any_converged || r.converged;
    if (-r.value > best.s_max) {
      best.s_max = -r.value;
      best.angles = ChshAngles::from_directions(r.x(0), r.x(1), r.x(2), r.x(3));
    }
  }
  if (!any_converged) {
    throw ConvergenceError("CHSH angle optimization did not converge", kTsirelson - best.s_max);
  }
  return best;
}

}  // namespace sagnac
