#pragma once

// CHSH correlators and the S parameter, from states (exact Born
// probabilities) and from coincidence counts with Poissonian error
// propagation.

#include <array>

#include "sagnac/polarization.hpp"
#include "sagnac/qstate.hpp"

namespace sagnac {

inline constexpr double kTsirelson = 2.8284271247461903;  // 2 sqrt(2)

/// Analyzer angles of the four correlators E_0..E_3.
struct ChshAngles {
  std::array<double, 4> alpha{};
  std::array<double, 4> beta{};

  /// alpha = {0, pi/4, 0, pi/4}, beta = {pi/8, pi/8, 3pi/8, 3pi/8}.
  static ChshAngles canonical();
  /// Built from the four analyzer directions: E_0 = (a, b), E_1 = (a', b),
  /// E_2 = (a, b'), E_3 = (a', b').
  static ChshAngles from_directions(double a, double a_prime, double b, double b_prime);
};

/// Index of a row/column of a CountGrid. A rows are (a, a_perp, a', a'_perp);
/// B columns are (b, b_perp, b', b'_perp).
enum class GridIndex : int { Primary = 0, PrimaryPerp = 1, Secondary = 2, SecondaryPerp = 3 };

/// 4x4 coincidence table n(A setting, B setting). Counts are stored as
/// doubles so expected (non-integer) counts can flow through the same path.
struct CountGrid {
  Eigen::Matrix4d counts = Eigen::Matrix4d::Zero();
  std::array<PlateSetting, 4> a_settings{};
  std::array<PlateSetting, 4> b_settings{};
  double integration_time_s = 0.0;

  /// Throws InputError on negative or non-finite counts.
  void validate() const;
  double total() const { return counts.sum(); }
  /// Ideal-plate settings realizing the four analyzer directions.
  static std::array<PlateSetting, 4> settings_for(double primary, double secondary);
};

struct Correlation {
  double e = 0.0;
  double delta_e = 0.0;
};

struct SResult {
  double s = 0.0;  ///< signed
  double delta_s = 0.0;
  std::array<double, 4> e{};
  std::array<double, 4> delta_e{};
  double total_counts = 0.0;

  double magnitude() const;
  /// 2 sqrt(2) - |S|.
  double tsirelson_gap() const;
};

/// E = (n++ - n+- - n-+ + n--)/D with dE = 2/D^{3/2} sqrt((n++ + n--)(n+- + n-+)).
Correlation correlation_from_quadruple(double n_pp, double n_pm, double n_mp, double n_mm);

/// S = E_0 + E_1 - E_2 + E_3 from the quadruples (a, b), (a', b), (a, b'),
/// (a', b'); dS adds the dE_i in quadrature.
SResult s_from_count_grid(const CountGrid& grid);

/// Signed S from exact Born probabilities at linear analyzer angles.
double s_of_state(const DensityMatrix& rho, const ChshAngles& angles);

/// Expected counts flux * Tr(rho (M_a x M_b)) for the projectors of the given
/// plate settings.
CountGrid expected_count_grid(const DensityMatrix& rho, const std::array<PlateSetting, 4>& a,
                              const std::array<PlateSetting, 4>& b, double flux);

struct OptimizedAngles {
  ChshAngles angles;
  double s_max = 0.0;  ///< |S| at the optimum
};

/// Maximizes |S| over the four analyzer directions, starting from the
/// canonical angles. Throws ConvergenceError when no restart converges.
OptimizedAngles optimize_angles(const DensityMatrix& rho);

}  // namespace sagnac
