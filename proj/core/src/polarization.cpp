#include "sagnac/polarization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/NonLinearOptimization>

#include "minimize.hpp"
#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_two_pi(double angle) {
  double w = std::fmod(angle, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// Wraps into [-pi/2, pi/2).
double wrap_half_pi(double angle) {
  return angle - kPi * std::floor((angle + 0.5 * kPi) / kPi);
}

Matrix2c rotation(double theta) {
  Matrix2c r;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  r << c, -s, s, c;
  return r;
}

bool is_ideal(const PlateCalibration& cal, double nominal) { return cal.retardance == nominal; }

void check_near_nominal(const PlateCalibration& cal, double nominal, const char* name) {
  cal.validate();
  if (std::abs(cal.retardance - nominal) > 0.2 * kPi) {
    throw InputError(std::string(name) + " retardance " + std::to_string(cal.retardance) +
                     " rad is more than 0.2 pi from nominal");
  }
}

double overlap(const Ket2& target, const PlateSetting& setting) {
  return std::norm(target.normalized().dot(analyzer_ket(setting)));
}

StokesVector stokes_after(const PlateCalibration& cal, const Ket2& input, double angle) {
  return stokes_of(retarder_jones(angle - cal.zero_point, cal.retardance) * input);
}

// Residual vector (S1, S2, S3 per sample) for the Stokes-curve model.
struct StokesResidual {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::span<const StokesSample> samples;
  Ket2 input;
  mutable int evaluations = 0;

  int inputs() const { return 2; }
  int values() const { return 3 * static_cast<int>(samples.size()); }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    ++evaluations;
    PlateCalibration cal;
    cal.retardance = x(0);
    cal.zero_point = x(1);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const StokesVector model = stokes_after(cal, input, samples[k].plate_angle);
      const StokesVector& seen = samples[k].stokes;
      const double norm = seen.s0 != 0.0 ? seen.s0 : 1.0;
      const auto row = static_cast<Eigen::Index>(3 * k);
      fvec(row) = model.s1 - seen.s1 / norm;
      fvec(row + 1) = model.s2 - seen.s2 / norm;
      fvec(row + 2) = model.s3 - seen.s3 / norm;
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    constexpr double h = 1e-6;
    Eigen::VectorXd plus(values());
    Eigen::VectorXd minus(values());
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd xp = x;
      Eigen::VectorXd xm = x;
      xp(j) += h;
      xm(j) -= h;
      (*this)(xp, plus);
      (*this)(xm, minus);
      jac.col(j) = (plus - minus) / (2.0 * h);
    }
    return 0;
  }
};

}  // namespace

PlateCalibration PlateCalibration::ideal_half_wave(double zero_point) {
  return PlateCalibration{kPi, zero_point, 0.0, 0.0};
}

PlateCalibration PlateCalibration::ideal_quarter_wave(double zero_point) {
  return PlateCalibration{0.5 * kPi, zero_point, 0.0, 0.0};
}

void PlateCalibration::validate() const {
  if (!(retardance > 0.0 && retardance < kTwoPi)) {
    throw InputError("retardance must lie in (0, 2 pi), got " + std::to_string(retardance));
  }
  if (!(retardance_uncertainty >= 0.0) || !(zero_point_uncertainty >= 0.0)) {
    throw InputError("calibration uncertainties must be non-negative");
  }
  if (!std::isfinite(zero_point)) throw InputError("zero point must be finite");
}

PlateSetting PlateSetting::normalized() const {
  PlateSetting out = *this;
  out.hwp_angle = wrap_two_pi(hwp_angle);
  out.qwp_angle = wrap_two_pi(qwp_angle);
  return out;
}

double StokesVector::polarized_fraction() const {
  return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3) / s0;
}

Matrix2c retarder_jones(double theta, double delta) {
  Matrix2c phase = Matrix2c::Zero();
  phase(0, 0) = 1.0;
  phase(1, 1) = std::polar(1.0, delta);
  return rotation(theta) * phase * rotation(-theta);
}

StokesVector stokes_of(const Ket2& field) {
  const double ih = std::norm(field(0));
  const double iv = std::norm(field(1));
  const Complex cross = std::conj(field(0)) * field(1);
  const double s0 = ih + iv;
  return StokesVector{1.0, (ih - iv) / s0, 2.0 * cross.real() / s0, 2.0 * cross.imag() / s0};
}

Ket2 analyzer_ket(const PlateSetting& setting) {
  const Matrix2c qwp = retarder_jones(setting.qwp_angle - setting.qwp_cal.zero_point,
                                      setting.qwp_cal.retardance);
  const Matrix2c hwp = retarder_jones(setting.hwp_angle - setting.hwp_cal.zero_point,
                                      setting.hwp_cal.retardance);
  return qwp.adjoint() * (hwp.adjoint() * Ket2(1.0, 0.0));
}

Projector1Q projector_from_plates(const PlateSetting& setting) {
  return Projector1Q::from_ket(analyzer_ket(setting));
}

ProjectionSolution plates_for_linear_projection(double alpha, const PlateCalibration& hwp_cal,
                                                const PlateCalibration& qwp_cal) {
  check_near_nominal(hwp_cal, kPi, "half-wave plate");
  check_near_nominal(qwp_cal, 0.5 * kPi, "quarter-wave plate");

  PlateSetting guess;
  guess.hwp_cal = hwp_cal;
  guess.qwp_cal = qwp_cal;
  guess.hwp_angle = 0.5 * alpha + hwp_cal.zero_point;
  guess.qwp_angle = alpha + qwp_cal.zero_point;

  const Ket2 target = linear_ket(alpha);
  if (is_ideal(hwp_cal, kPi) && is_ideal(qwp_cal, 0.5 * kPi)) {
    return ProjectionSolution{guess.normalized(), overlap(target, guess)};
  }

  auto loss = [&](const Eigen::VectorXd& x) {
    PlateSetting s = guess;
    s.hwp_angle = x(0);
    s.qwp_angle = x(1);
    return 1.0 - overlap(target, s);
  };
  detail::NelderMeadOptions opts;
  opts.initial_step = 0.02;
  opts.x_tolerance = 1e-11;
  opts.f_tolerance = 1e-16;
  Eigen::VectorXd start(2);
  start << guess.hwp_angle, guess.qwp_angle;
  const auto best = detail::nelder_mead(loss, start, opts);

  PlateSetting solved = guess;
  solved.hwp_angle = best.x(0);
  solved.qwp_angle = best.x(1);
  const double achieved = overlap(target, solved);
  if (achieved < 0.99) {
    throw InputError("plate calibration cannot reach the linear projection at alpha = " +
                     std::to_string(alpha) + " (overlap " + std::to_string(achieved) + ")");
  }
  return ProjectionSolution{solved.normalized(), achieved};
}

ProjectionSolution plates_for_projection(const Ket2& target, const PlateCalibration& hwp_cal,
                                         const PlateCalibration& qwp_cal) {
  check_near_nominal(hwp_cal, kPi, "half-wave plate");
  check_near_nominal(qwp_cal, 0.5 * kPi, "quarter-wave plate");

  PlateSetting base;
  base.hwp_cal = hwp_cal;
  base.qwp_cal = qwp_cal;
  auto loss = [&](const Eigen::VectorXd& x) {
    PlateSetting s = base;
    s.hwp_angle = x(0);
    s.qwp_angle = x(1);
    return 1.0 - overlap(target, s);
  };

  // Coarse grid of starts; the overlap landscape has several equivalent optima.
  constexpr int kStarts = 8;
  detail::MinimizeResult best;
  best.value = 2.0;
  detail::NelderMeadOptions opts;
  opts.initial_step = 0.05;
  opts.x_tolerance = 1e-11;
  opts.f_tolerance = 1e-16;
  for (int i = 0; i < kStarts; ++i) {
    for (int j = 0; j < kStarts; ++j) {
      Eigen::VectorXd start(2);
      start << hwp_cal.zero_point + kPi * i / kStarts, qwp_cal.zero_point + kPi * j / kStarts;
      if (loss(start) > best.value + 0.5) continue;
      auto r = detail::nelder_mead(loss, start, opts);
      if (r.value < best.value - 1e-15) best = r;
    }
  }
  PlateSetting solved = base;
  solved.hwp_angle = best.x(0);
  solved.qwp_angle = best.x(1);
  const double achieved = overlap(target, solved);
  if (achieved < 0.99) {
    throw InputError("plate calibration cannot reach the requested projection (overlap " +
                     std::to_string(achieved) + ")");
  }
  return ProjectionSolution{solved.normalized(), achieved};
}

std::vector<StokesSample> stokes_curve(const PlateCalibration& cal, const Ket2& input,
                                       std::span<const double> angles) {
  std::vector<StokesSample> out;
  out.reserve(angles.size());
  for (double angle : angles) out.push_back({angle, stokes_after(cal, input, angle)});
  return out;
}

WaveplateFit fit_waveplate(std::span<const StokesSample> samples,
                           const WaveplateFitOptions& options) {
  if (samples.size() < 8) {
    throw InputError("wave plate fit needs at least 8 Stokes samples, got " +
                     std::to_string(samples.size()));
  }
  const auto [lo, hi] = std::minmax_element(
      samples.begin(), samples.end(),
      [](const StokesSample& a, const StokesSample& b) { return a.plate_angle < b.plate_angle; });
  if (hi->plate_angle - lo->plate_angle < 0.5 * kPi - 1e-12) {
    throw InputError("wave plate samples must span at least 90 degrees of rotation");
  }

  StokesResidual residual{samples, options.input.normalized()};
  const Eigen::Index m = residual.values();
  Eigen::VectorXd fvec(m);

  // Coarse global search, then Levenberg-Marquardt.
  Eigen::VectorXd x(2);
  double best_ss = std::numeric_limits<double>::infinity();
  constexpr int kRetardanceSteps = 24;
  constexpr int kZeroSteps = 12;
  for (int i = 0; i < kRetardanceSteps; ++i) {
    for (int j = 0; j < kZeroSteps; ++j) {
      Eigen::VectorXd trial(2);
      trial << kTwoPi * (i + 0.5) / kRetardanceSteps, kPi * j / kZeroSteps;
      residual(trial, fvec);
      const double ss = fvec.squaredNorm();
      if (ss < best_ss) {
        best_ss = ss;
        x = trial;
      }
    }
  }

  Eigen::LevenbergMarquardt<StokesResidual> lm(residual);
  lm.parameters.ftol = 1e-15;
  lm.parameters.xtol = 1e-15;
  lm.parameters.maxfev = 4000;
  const auto status = lm.minimize(x);
  residual(x, fvec);
  const double rms = std::sqrt(fvec.squaredNorm() / static_cast<double>(m));
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
      status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation ||
      !x.allFinite()) {
    throw ConvergenceError("wave plate fit did not converge (rms residual " +
                               std::to_string(rms) + ")",
                           rms);
  }

  // Covariance from the Gauss-Newton normal matrix scaled by the residual
  // variance.
  Eigen::MatrixXd jac(m, 2);
  residual.df(x, jac);
  const double dof = static_cast<double>(m - 2);
  const double variance = fvec.squaredNorm() / dof;
  const Eigen::Matrix2d covariance = (jac.transpose() * jac).inverse() * variance;

  // Pick the representative of {(d, t), (2 pi - d, t + pi/2)} mod pi closest to the hint.
  double delta = wrap_two_pi(x(0));
  const double theta = x(1);
  const double hint = options.zero_point_hint;
  const double t1 = hint + wrap_half_pi(theta - hint);
  const double t2 = hint + wrap_half_pi(theta + 0.5 * kPi - hint);
  double zero = t1;
  if (std::abs(t2 - hint) < std::abs(t1 - hint)) {
    zero = t2;
    delta = wrap_two_pi(kTwoPi - delta);
  }
  zero = std::fmod(zero, kPi);
  if (zero < 0.0) zero += kPi;

  WaveplateFit fit;
  fit.calibration.retardance = delta;
  fit.calibration.zero_point = zero;
  fit.calibration.retardance_uncertainty = std::sqrt(std::max(0.0, covariance(0, 0)));
  fit.calibration.zero_point_uncertainty = std::sqrt(std::max(0.0, covariance(1, 1)));
  fit.residual_rms = rms;
  fit.evaluations = residual.evaluations;
  return fit;
}

}  // namespace sagnac
