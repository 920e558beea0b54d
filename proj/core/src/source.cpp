#include "sagnac/source.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

constexpr double kPi = std::numbers::pi;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InputError(std::string(name) + " must be positive, got " + std::to_string(value));
  }
}

double wavenumber(double index, double wavelength_nm) {
  return 2.0 * kPi * index / (wavelength_nm * 1e-6);
}

double group_index(CrystalAxis axis, const CrystalGeometry& geom) {
  return axis == CrystalAxis::Ordinary ? geom.group_index_ordinary
                                       : geom.group_index_extraordinary;
}

double trapezoid(const std::vector<double>& values, double step) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t i = 1; i + 1 < values.size(); ++i) sum += values[i];
  return sum * step;
}

void normalize(TemporalDensity& density) {
  const double total = density.integral();
  if (!(total > 0.0)) throw InputError("temporal density has zero mass");
  for (double& v : density.values) v /= total;
}

void check_offset(double z_c_mm, const CrystalGeometry& geom) {
  if (!std::isfinite(z_c_mm) || std::abs(z_c_mm) / geom.pump_index > 0.5 * geom.length_mm) {
    throw InputError("crystal offset " + std::to_string(z_c_mm) +
                     " mm moves the focus outside the crystal");
  }
}

}  // namespace

void CrystalGeometry::validate() const {
  require_positive(length_mm, "crystal length");
  require_positive(pump_index, "pump index");
  require_positive(group_index_ordinary, "ordinary group index");
  require_positive(group_index_extraordinary, "extraordinary group index");
  require_positive(waist_pump_um, "pump waist");
  require_positive(waist_signal_um, "signal waist");
  require_positive(waist_idler_um, "idler waist");
  require_positive(pump_wavelength_nm, "pump wavelength");
  require_positive(photon_wavelength_nm, "photon wavelength");
  require_positive(wavepacket_fwhm_ps, "wavepacket FWHM");
}

double CrystalGeometry::pump_wavenumber() const {
  return wavenumber(pump_index, pump_wavelength_nm);
}

double CrystalGeometry::signal_wavenumber() const {
  return wavenumber(group_index_ordinary, photon_wavelength_nm);
}

double CrystalGeometry::idler_wavenumber() const {
  return wavenumber(group_index_extraordinary, photon_wavelength_nm);
}

double CrystalGeometry::bandwidth() const {
  return 2.0 * std::sqrt(2.0 * std::log(2.0)) / wavepacket_fwhm_ps;
}

void SourceParams::validate() const {
  if (!(balance >= 0.0 && balance <= 2.0)) {
    throw InputError("balance P must lie in [0, 2], got " + std::to_string(balance));
  }
  if (!std::isfinite(phase)) throw InputError("phase must be finite");
  if (!(multipair_ratio >= 0.0) || !std::isfinite(multipair_ratio)) {
    throw InputError("multipair ratio must be non-negative");
  }
  for (double eta : {efficiency_a, efficiency_b}) {
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw InputError("channel efficiencies must lie in (0, 1], got " + std::to_string(eta));
    }
  }
  require_positive(coincidence_window_ps, "coincidence window");
  geometry.validate();
  check_offset(crystal_offset_mm, geometry);
}

double TemporalDensity::integral() const { return trapezoid(values, step); }

double TemporalDensity::mean() const {
  std::vector<double> weighted(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) weighted[i] = time(i) * values[i];
  return trapezoid(weighted, step) / integral();
}

PureState balance_state(double balance, double phase) {
  if (!(balance >= 0.0 && balance <= 2.0)) {
    throw InputError("balance P must lie in [0, 2], got " + std::to_string(balance));
  }
  Ket4 amps = Ket4::Zero();
  amps(1) = std::sqrt(1.0 - 0.5 * balance);
  amps(2) = -std::sqrt(0.5 * balance) * std::polar(1.0, phase);
  return PureState::normalized(amps);
}

Complex spatial_overlap(double z_mm, const FocusPositions& foci, const CrystalGeometry& geom) {
  const double wp = geom.waist_pump_um * 1e-3;
  const double ws = geom.waist_signal_um * 1e-3;
  const double wi = geom.waist_idler_um * 1e-3;
  const Complex qp(wp * wp, 2.0 * (z_mm - foci.pump) / geom.pump_wavenumber());
  const Complex qs(ws * ws, 2.0 * (z_mm - foci.signal) / geom.signal_wavenumber());
  const Complex qi(wi * wi, 2.0 * (z_mm - foci.idler) / geom.idler_wavenumber());
  const Complex denom =
      std::conj(qs) * std::conj(qi) + qp * std::conj(qi) + qp * std::conj(qs);
  return wp * ws * wi / denom;
}

TemporalDensity collection_time_density(double z_c_mm, CrystalAxis axis, Direction direction,
                                        const CrystalGeometry& geom, double step) {
  geom.validate();
  if (!(step > 0.0) || step > kMaxTimeStep) {
    throw InputError("time grid step " + std::to_string(step) + " ps is coarser than " +
                     std::to_string(kMaxTimeStep) + " ps");
  }
  check_offset(z_c_mm, geom);

  const double velocity = kSpeedOfLight / group_index(axis, geom);
  const double half = 0.5 * geom.length_mm / velocity;
  const double span = half + 5.0 * geom.wavepacket_fwhm_ps;
  const auto n = static_cast<std::size_t>(std::ceil(span / step));

  const double sign = direction == Direction::Clockwise ? 1.0 : -1.0;
  const double shift = sign * z_c_mm / geom.pump_index;
  const FocusPositions foci{0.0, shift, shift};

  TemporalDensity out;
  out.step = step;
  out.start = -static_cast<double>(n) * step;
  out.values.assign(2 * n + 1, 0.0);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double t = out.time(i);
    if (std::abs(t) <= half) out.values[i] = std::norm(spatial_overlap(t * velocity, foci, geom));
  }
  normalize(out);
  return out;
}

TemporalDensity arrival_density(const TemporalDensity& tau, const CrystalGeometry& geom) {
  geom.validate();
  const double dw = geom.bandwidth();
  const double step = tau.step;
  const auto half_width = static_cast<std::ptrdiff_t>(std::ceil(6.0 / dw / step));
  std::vector<double> kernel(static_cast<std::size_t>(2 * half_width + 1));
  for (std::ptrdiff_t k = -half_width; k <= half_width; ++k) {
    const double t = static_cast<double>(k) * step;
    kernel[static_cast<std::size_t>(k + half_width)] =
        dw / std::sqrt(2.0 * kPi) * std::exp(-0.5 * t * t * dw * dw);
  }

  TemporalDensity out;
  out.step = step;
  out.start = tau.start;
  const auto n = static_cast<std::ptrdiff_t>(tau.values.size());
  out.values.assign(tau.values.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double v = tau.values[static_cast<std::size_t>(i)];
    if (v == 0.0) continue;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - half_width);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + half_width);
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      out.values[static_cast<std::size_t>(j)] +=
          v * kernel[static_cast<std::size_t>(j - i + half_width)] * step;
    }
  }
  normalize(out);
  return out;
}

double direction_overlap(double z_c_mm, CrystalAxis axis, const CrystalGeometry& geom,
                         double step) {
  const TemporalDensity cw =
      arrival_density(collection_time_density(z_c_mm, axis, Direction::Clockwise, geom, step),
                      geom);
  const TemporalDensity ccw = arrival_density(
      collection_time_density(z_c_mm, axis, Direction::CounterClockwise, geom, step), geom);
  std::vector<double> root(cw.values.size());
  for (std::size_t i = 0; i < root.size(); ++i) root[i] = std::sqrt(cw.values[i] * ccw.values[i]);
  const double overlap = trapezoid(root, step);
  return std::clamp(overlap * overlap, 0.0, 1.0);
}

namespace {

double mixing_visibility(double z_c_mm, const CrystalGeometry& geom) {
  if (z_c_mm == 0.0) return 1.0;
  const double o = direction_overlap(z_c_mm, CrystalAxis::Ordinary, geom);
  const double e = direction_overlap(z_c_mm, CrystalAxis::Extraordinary, geom);
  return 0.5 * (o + e);
}

}  // namespace

DensityMatrix crystal_offset_state(double z_c_mm, const CrystalGeometry& geom) {
  const double v = mixing_visibility(z_c_mm, geom);
  Matrix4c rho = v * make_bell_psi_minus().projector();
  rho(1, 1) += 0.5 * (1.0 - v);
  rho(2, 2) += 0.5 * (1.0 - v);
  return DensityMatrix(rho);
}

MultipairParams multipair_params_from_rates(double singles_a, double singles_b,
                                            double coincidences, double window_ps) {
  require_positive(singles_a, "singles rate A");
  require_positive(singles_b, "singles rate B");
  require_positive(coincidences, "coincidence rate");
  require_positive(window_ps, "coincidence window");
  if (coincidences > std::min(singles_a, singles_b)) {
    throw InputError("coincidence rate exceeds a singles rate");
  }
  MultipairParams out;
  out.nu_hz = singles_a * singles_b / coincidences;
  out.efficiency_a = coincidences / singles_b;
  out.efficiency_b = coincidences / singles_a;
  out.p = out.nu_hz * window_ps * 1e-12;
  return out;
}

namespace {

double ratio_from_populations(double ha, double va, double hb, double vb, double p, double eta_a,
                              double eta_b) {
  const double t1 = (2.0 - eta_a * va) * (2.0 - eta_b * hb) * va * hb;
  const double t2 = (2.0 - eta_a * ha) * (2.0 - eta_b * vb) * ha * vb;
  const double t3 = 2.0 * (1.0 - eta_a * ha * va) * (1.0 - eta_b * hb * vb);
  return 0.5 * p * (t1 + t2 + t3);
}

}  // namespace

double accidental_ratio(double alpha, double beta, double p, double eta_a, double eta_b) {
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  const double cb = std::cos(beta);
  const double sb = std::sin(beta);
  return ratio_from_populations(ca * ca, sa * sa, cb * cb, sb * sb, p, eta_a, eta_b);
}

double accidental_ratio(const Projector1Q& ma, const Projector1Q& mb, double p, double eta_a,
                        double eta_b) {
  return ratio_from_populations(ma.h_population(), ma.v_population(), mb.h_population(),
                                mb.v_population(), p, eta_a, eta_b);
}

DensityMatrix combined_source_state(const SourceParams& params) {
  params.validate();
  const PureState pure = balance_state(params.balance, params.phase);
  const double v = mixing_visibility(params.crystal_offset_mm, params.geometry);
  Matrix4c rho = v * pure.projector();
  rho(1, 1) += (1.0 - v) * (1.0 - 0.5 * params.balance);
  rho(2, 2) += (1.0 - v) * 0.5 * params.balance;
  return DensityMatrix(rho);
}

}  // namespace sagnac
