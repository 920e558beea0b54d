#pragma once

// Physical models of the Sagnac pair source: pump balance, the crystal
// offset overlap model and multi-pair accidentals. Lengths are millimetres,
// times picoseconds.

#include <vector>

#include "sagnac/qstate.hpp"

namespace sagnac {

/// Speed of light in mm/ps.
inline constexpr double kSpeedOfLight = 0.299792458;

struct CrystalGeometry {
  double length_mm = 15.0;
  double pump_index = 1.841;
  double group_index_ordinary = 1.805;
  double group_index_extraordinary = 1.910;
  double waist_pump_um = 26.0;
  double waist_signal_um = 36.0;
  double waist_idler_um = 36.0;
  double pump_wavelength_nm = 403.9;
  double photon_wavelength_nm = 807.8;
  double wavepacket_fwhm_ps = 1.92;
  double degenerate_temperature_c = 31.9;  // carried only

  void validate() const;

  /// Wavenumbers in 1/mm. The signal photon is the ordinary one.
  double pump_wavenumber() const;
  double signal_wavenumber() const;
  double idler_wavenumber() const;
  /// Spectral width 2 sqrt(2 ln 2) / FWHM in 1/ps.
  double bandwidth() const;
};

enum class CrystalAxis { Ordinary, Extraordinary };
enum class Direction { Clockwise, CounterClockwise };

struct SourceParams {
  double balance = 1.0;  ///< P
  double phase = 0.0;    ///< phi, radians
  double crystal_offset_mm = 0.0;
  double multipair_ratio = 0.0;  ///< p
  double efficiency_a = 1.0;
  double efficiency_b = 1.0;
  double coincidence_window_ps = 96.0;
  CrystalGeometry geometry;

  void validate() const;
};

/// Probability density on a uniform, zero-centred time grid.
struct TemporalDensity {
  double step = 0.005;        ///< ps
  double start = 0.0;         ///< time of values[0], ps
  std::vector<double> values;  ///< 1/ps

  double time(std::size_t index) const { return start + step * static_cast<double>(index); }
  double integral() const;  ///< trapezoid rule
  double mean() const;
};

inline constexpr double kDefaultTimeStep = 0.005;
inline constexpr double kMaxTimeStep = 0.01;

/// sqrt(1 - P/2)|HV> - sqrt(P/2) e^{i phi}|VH>.
PureState balance_state(double balance, double phase = 0.0);

/// Internal focus positions (mm) of the three fields.
struct FocusPositions {
  double pump = 0.0;
  double signal = 0.0;
  double idler = 0.0;
};

/// Gaussian-beam overlap w_p w_s w_i / (q_s* q_i* + q_p q_i* + q_p q_s*) with
/// q_j = w_j^2 + 2i(z - z0_j)/k_j.
Complex spatial_overlap(double z_mm, const FocusPositions& foci, const CrystalGeometry& geom);

/// Normalized |O_s|^2 mapped to time through t = z / v_g on the crystal
/// support. The external offset z_c moves the collection foci by +z_c/n_p
/// (clockwise) or -z_c/n_p (counter-clockwise); the pump focus stays central.
TemporalDensity collection_time_density(double z_c_mm, CrystalAxis axis, Direction direction,
                                        const CrystalGeometry& geom,
                                        double step = kDefaultTimeStep);

/// Convolution with the Gaussian pump envelope of FWHM wavepacket_fwhm_ps.
TemporalDensity arrival_density(const TemporalDensity& tau, const CrystalGeometry& geom);

/// (integral of sqrt(Q_cw Q_ccw) dt)^2.
double direction_overlap(double z_c_mm, CrystalAxis axis, const CrystalGeometry& geom,
                         double step = kDefaultTimeStep);

/// V |Psi-><Psi-| + (1 - V)/2 (|HV><HV| + |VH><VH|) with V = (O_o + O_e)/2.
DensityMatrix crystal_offset_state(double z_c_mm, const CrystalGeometry& geom);

struct MultipairParams {
  double nu_hz = 0.0;
  double efficiency_a = 0.0;
  double efficiency_b = 0.0;
  double p = 0.0;
};

MultipairParams multipair_params_from_rates(double singles_a, double singles_b,
                                            double coincidences, double window_ps);

/// Fourfold-to-coincidence ratio for linear analyzers at alpha, beta.
double accidental_ratio(double alpha, double beta, double p, double eta_a, double eta_b);

/// Same for arbitrary projectors; cos^2 and sin^2 become the H and V
/// populations of each projector.
double accidental_ratio(const Projector1Q& ma, const Projector1Q& mb, double p, double eta_a,
                        double eta_b);

/// Crystal-offset mixing applied to the balance state; the incoherent part
/// keeps the P-weighted HV/VH populations. Accidentals are not included.
DensityMatrix combined_source_state(const SourceParams& params);

}  // namespace sagnac
