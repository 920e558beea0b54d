#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sagnac/errors.hpp"
#include "sagnac/expsim.hpp"
#include "sagnac/polarization.hpp"

using namespace sagnac;
using doctest::Approx;
using oracle::kDeg;
using oracle::kPi;

namespace {

const Ket2 kH(1.0, 0.0);

double ket_overlap(const Ket2& a, const Ket2& b) { return std::norm(a.dot(b)); }

std::vector<double> sweep_angles(double start, int n, double step) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(start + step * i);
  return out;
}

// Mod-pi distance between two zero points.
double axis_distance(double a, double b) {
  const double d = std::remainder(a - b, kPi);
  return std::abs(d);
}

}  // namespace

TEST_CASE("retarders are unitary") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Matrix2c w = retarder_jones(u(rng), u(rng));
    REQUIRE((w.adjoint() * w - Matrix2c::Identity()).norm() < 1e-12);
  }
}

TEST_CASE("retarder special cases") {
  const Matrix2c hwp0 = retarder_jones(0.0, kPi);
  CHECK(std::abs(hwp0(0, 0) - Complex(1, 0)) < 1e-15);
  CHECK(std::abs(hwp0(1, 1) - Complex(-1, 0)) < 1e-15);
  CHECK(std::abs(hwp0(0, 1)) < 1e-15);

  const Ket2 v = retarder_jones(kPi / 4, kPi) * kH;
  CHECK(ket_overlap(v, Ket2(0, 1)) == Approx(1.0).epsilon(1e-14));

  const StokesVector circ = stokes_of(retarder_jones(kPi / 4, kPi / 2) * kH);
  CHECK(std::abs(circ.s3) == Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(circ.s1) < 1e-14);
}

TEST_CASE("handedness convention") {
  const StokesVector r = stokes_of(Ket2(Complex(1, 0), Complex(0, 1)) / std::sqrt(2.0));
  CHECK(r.s3 == Approx(1.0));
}

TEST_CASE("projectors from ideal plates") {
  PlateSetting s;
  CHECK((projector_from_plates(s).matrix() - linear_projector(0).matrix()).norm() < 1e-12);
  s.hwp_angle = kPi / 8;
  s.qwp_angle = kPi / 4;
  CHECK((projector_from_plates(s).matrix() - linear_projector(kPi / 4).matrix()).norm() < 1e-12);
}

TEST_CASE("calibrated signal plates at their zero points project onto H") {
  const AnalyzerCalibrations cal = AnalyzerCalibrations::reference();
  PlateSetting s;
  s.hwp_cal = cal.a_hwp;
  s.qwp_cal = cal.a_qwp;
  s.hwp_angle = 35.924 * kDeg;
  s.qwp_angle = 34.492 * kDeg;
  const double d =
      oracle::trace_distance2(projector_from_plates(s).matrix(), linear_projector(0).matrix());
  CHECK(d < 1e-3);
}

TEST_CASE("projectors are rank-1 Hermitian idempotents for any setting") {
  const AnalyzerCalibrations cal = AnalyzerCalibrations::reference();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2 * kPi);
  for (int i = 0; i < 500; ++i) {
    PlateSetting s;
    s.hwp_cal = cal.b_hwp;
    s.qwp_cal = cal.b_qwp;
    s.hwp_angle = u(rng);
    s.qwp_angle = u(rng);
    const Matrix2c m = projector_from_plates(s).matrix();
    REQUIRE((m * m - m).norm() < 1e-10);
    REQUIRE((m - m.adjoint()).norm() < 1e-12);
    REQUIRE(std::abs(m.trace() - Complex(1, 0)) < 1e-12);
  }
}

TEST_CASE("linear projection with ideal plates is closed form") {
  const auto h = PlateCalibration::ideal_half_wave();
  const auto q = PlateCalibration::ideal_quarter_wave();
  const ProjectionSolution zero = plates_for_linear_projection(0.0, h, q);
  CHECK(zero.setting.hwp_angle == Approx(0.0));
  CHECK(zero.setting.qwp_angle == Approx(0.0));
  const ProjectionSolution eighth = plates_for_linear_projection(kPi / 8, h, q);
  CHECK(eighth.setting.hwp_angle == Approx(kPi / 16));
  CHECK(eighth.setting.qwp_angle == Approx(kPi / 8));
  CHECK(eighth.overlap == Approx(1.0));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, kPi);
  for (int i = 0; i < 100; ++i) {
    const double alpha = u(rng);
    const ProjectionSolution sol = plates_for_linear_projection(alpha, h, q);
    REQUIRE((projector_from_plates(sol.setting).matrix() - linear_projector(alpha).matrix())
                .norm() < 1e-10);
  }
}

TEST_CASE("linear projection with calibrated plates against a grid search") {
  const AnalyzerCalibrations cal = AnalyzerCalibrations::reference();
  const double alpha = kPi / 8;
  const ProjectionSolution sol = plates_for_linear_projection(alpha, cal.a_hwp, cal.a_qwp);
  CHECK(sol.overlap >= 0.9999);

  const Ket2 target = linear_ket(alpha);
  auto overlap = [&](double h, double q) {
    PlateSetting s;
    s.hwp_cal = cal.a_hwp;
    s.qwp_cal = cal.a_qwp;
    s.hwp_angle = h;
    s.qwp_angle = q;
    return ket_overlap(analyzer_ket(s), target);
  };
  CHECK(overlap(sol.setting.hwp_angle, sol.setting.qwp_angle) == Approx(sol.overlap));

  // Coarse 1 degree scan of the whole torus, then 0.01 degree around its best.
  double best = -1.0;
  double bh = 0.0;
  double bq = 0.0;
  for (int i = 0; i < 180; ++i) {
    for (int j = 0; j < 180; ++j) {
      const double v = overlap(i * kDeg, j * kDeg);
      if (v > best) {
        best = v;
        bh = i * kDeg;
        bq = j * kDeg;
      }
    }
  }
  const double ch = bh;
  const double cq = bq;
  for (int i = -150; i <= 150; ++i) {
    for (int j = -150; j <= 150; ++j) {
      const double h = ch + i * 0.01 * kDeg;
      const double q = cq + j * 0.01 * kDeg;
      const double v = overlap(h, q);
      if (v > best) {
        best = v;
        bh = h;
        bq = q;
      }
    }
  }
  CHECK(sol.overlap >= best - 1e-8);
  // Turning both plates by 90 degrees leaves the projector unchanged.
  const double shift = 0.5 * kPi;
  const bool same = axis_distance(sol.setting.hwp_angle, bh) < 0.02 * kDeg &&
                    axis_distance(sol.setting.qwp_angle, bq) < 0.02 * kDeg;
  const bool turned = axis_distance(sol.setting.hwp_angle, bh + shift) < 0.02 * kDeg &&
                      axis_distance(sol.setting.qwp_angle, bq + shift) < 0.02 * kDeg;
  CHECK((same || turned));
  CHECK(overlap(bh + shift, bq + shift) == Approx(best).epsilon(1e-12));
}

TEST_CASE("linear projection rejects far-off retardance") {
  PlateCalibration bad = PlateCalibration::ideal_half_wave();
  bad.retardance = 0.7 * kPi;
  CHECK_THROWS_AS(plates_for_linear_projection(0.3, bad, PlateCalibration::ideal_quarter_wave()),
                  InputError);
}

TEST_CASE("stokes curve examples") {
  const double zp = 0.3;
  const auto hwp = PlateCalibration::ideal_half_wave(zp);
  const auto qwp = PlateCalibration::ideal_quarter_wave(zp);
  const std::vector<double> angles{zp, zp + kPi / 4};
  const auto h = stokes_curve(hwp, kH, angles);
  CHECK(h[0].stokes.s1 == Approx(1.0));
  CHECK(h[1].stokes.s1 == Approx(-1.0));
  CHECK(std::abs(h[1].stokes.s2) < 1e-12);
  const auto q = stokes_curve(qwp, kH, angles);
  CHECK(std::abs(q[1].stokes.s3) == Approx(1.0));
  CHECK(std::abs(q[1].stokes.s1) < 1e-12);

  const auto a = stokes_curve(hwp, kH, sweep_angles(0.0, 20, 0.17));
  const auto b = stokes_curve(hwp, kH, sweep_angles(kPi, 20, 0.17));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].stokes.s1 == Approx(b[i].stokes.s1));
    CHECK(a[i].stokes.s2 == Approx(b[i].stokes.s2));
  }
}

TEST_CASE("generated Stokes samples are fully polarized") {
  for (const auto& cal : {AnalyzerCalibrations::reference().a_qwp,
                          AnalyzerCalibrations::reference().b_hwp}) {
    for (const auto& s : stokes_curve(cal, Ket2(0.6, 0.8), sweep_angles(0.0, 40, 0.083))) {
      const StokesVector& v = s.stokes;
      CHECK(v.s1 * v.s1 + v.s2 * v.s2 + v.s3 * v.s3 == Approx(v.s0 * v.s0).epsilon(1e-12));
      CHECK(v.polarized_fraction() == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("noiseless fits recover every reference calibration") {
  const AnalyzerCalibrations cal = AnalyzerCalibrations::reference();
  const auto angles = sweep_angles(0.0, 37, 5 * kDeg);
  for (const PlateCalibration& truth : {cal.a_hwp, cal.a_qwp, cal.b_hwp, cal.b_qwp}) {
    WaveplateFitOptions opts;
    opts.zero_point_hint = truth.zero_point + 2 * kDeg;
    const WaveplateFit fit = fit_waveplate(stokes_curve(truth, kH, angles), opts);
    CHECK(std::abs(fit.calibration.retardance - truth.retardance) < 1e-6);
    CHECK(axis_distance(fit.calibration.zero_point, truth.zero_point) < 1e-6);
    CHECK(fit.residual_rms < 1e-9);
  }
}

TEST_CASE("noiseless ideal half-wave fit") {
  const auto truth = PlateCalibration::ideal_half_wave(0.4);
  WaveplateFitOptions opts;
  opts.zero_point_hint = 0.4;
  const WaveplateFit fit = fit_waveplate(stokes_curve(truth, kH, sweep_angles(0, 24, 0.1)), opts);
  CHECK(fit.calibration.retardance == Approx(kPi).epsilon(1e-9));
  CHECK(fit.calibration.zero_point == Approx(0.4).epsilon(1e-9));
}

TEST_CASE("fit coverage under Stokes noise") {
  const AnalyzerCalibrations cal = AnalyzerCalibrations::reference();
  const PlateCalibration truth = cal.a_hwp;
  const auto clean = stokes_curve(truth, kH, sweep_angles(0.0, 37, 5 * kDeg));
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.01);
  WaveplateFitOptions opts;
  opts.zero_point_hint = truth.zero_point;
  int covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    auto samples = clean;
    for (auto& s : samples) {
      s.stokes.s1 += noise(rng);
      s.stokes.s2 += noise(rng);
      s.stokes.s3 += noise(rng);
    }
    const WaveplateFit fit = fit_waveplate(samples, opts);
    if (std::abs(fit.calibration.retardance - truth.retardance) <=
        3 * fit.calibration.retardance_uncertainty) {
      ++covered;
    }
  }
  CHECK(covered >= trials * 97 / 100);
}

TEST_CASE("fit rejects degenerate sample sets") {
  const auto truth = PlateCalibration::ideal_half_wave();
  CHECK_THROWS_AS(fit_waveplate(stokes_curve(truth, kH, sweep_angles(0, 7, 0.3))), InputError);
  CHECK_THROWS_AS(fit_waveplate(stokes_curve(truth, kH, sweep_angles(0, 12, 0.1))), InputError);
  CHECK_THROWS_AS(fit_waveplate(stokes_curve(truth, kH, std::vector<double>(10, 0.2))),
                  InputError);
}
