#pragma once

// Jones-calculus model of the polarization analyzers. Each analyzer is a
// quarter-wave plate followed by a half-wave plate and a polarizer fixed at H.
// All angles are radians.

#include <span>
#include <vector>

#include "sagnac/qstate.hpp"

namespace sagnac {

/// Measured properties of one wave plate.
struct PlateCalibration {
  double retardance = 0.0;  ///< delta in (0, 2 pi)
  double zero_point = 0.0;  ///< angle of the optical axis relative to the mount zero
  double retardance_uncertainty = 0.0;
  double zero_point_uncertainty = 0.0;

  static PlateCalibration ideal_half_wave(double zero_point = 0.0);
  static PlateCalibration ideal_quarter_wave(double zero_point = 0.0);

  /// Throws InputError when the invariants do not hold.
  void validate() const;
};

/// Mount angles of the two plates of one analyzer plus their calibrations.
struct PlateSetting {
  double hwp_angle = 0.0;
  double qwp_angle = 0.0;
  PlateCalibration hwp_cal = PlateCalibration::ideal_half_wave();
  PlateCalibration qwp_cal = PlateCalibration::ideal_quarter_wave();

  /// Wraps both angles into [0, 2 pi).
  PlateSetting normalized() const;
};

/// S0-normalized Stokes vector.
struct StokesVector {
  double s0 = 1.0;
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;

  double polarized_fraction() const;
};

struct StokesSample {
  double plate_angle = 0.0;
  StokesVector stokes;
};

/// R(theta) diag(1, e^{i delta}) R(-theta).
Matrix2c retarder_jones(double theta, double delta);

/// Stokes vector of a single-photon polarization ket. S3 = 2 Im(E_H^* E_V),
/// so (|H> + i|V>)/sqrt(2) has S3 = +1.
StokesVector stokes_of(const Ket2& field);

/// The ket that passes QWP -> HWP -> H-polarizer with unit probability.
Ket2 analyzer_ket(const PlateSetting& setting);
Projector1Q projector_from_plates(const PlateSetting& setting);

struct ProjectionSolution {
  PlateSetting setting;
  double overlap = 1.0;  ///< <target|M|target> achieved by the setting
};

/// Plate angles projecting onto cos(alpha)|H> + sin(alpha)|V>. Ideal plates
/// use the closed form (qwp = alpha, hwp = alpha/2, plus zero points);
/// imperfect retardance falls back to a bounded 2-D maximization.
ProjectionSolution plates_for_linear_projection(double alpha, const PlateCalibration& hwp_cal,
                                                const PlateCalibration& qwp_cal);

/// Same for an arbitrary (possibly elliptical) target ket.
ProjectionSolution plates_for_projection(const Ket2& target, const PlateCalibration& hwp_cal,
                                         const PlateCalibration& qwp_cal);

/// Output Stokes vectors of retarder_jones(angle - zero_point, retardance)
/// applied to `input`, one per angle.
std::vector<StokesSample> stokes_curve(const PlateCalibration& cal, const Ket2& input,
                                       std::span<const double> angles);

struct WaveplateFitOptions {
  Ket2 input = Ket2(1.0, 0.0);
  /// The fitted (retardance, zero point) is only defined up to the axis
  /// relabeling (delta, theta0) ~ (2 pi - delta, theta0 + pi/2); the
  /// representative whose zero point lies closest to this hint is returned.
  double zero_point_hint = 0.0;
};

struct WaveplateFit {
  PlateCalibration calibration;
  double residual_rms = 0.0;
  int evaluations = 0;
};

/// Least-squares fit of (retardance, zero point) to Stokes samples. Needs at
/// least 8 samples spanning at least 90 degrees of rotation.
WaveplateFit fit_waveplate(std::span<const StokesSample> samples,
                           const WaveplateFitOptions& options = {});

}  // namespace sagnac
