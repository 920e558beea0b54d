#pragma once

// Virtual experiments: Poisson count generation, repeated CHSH campaigns,
// single-error sweeps and the error budget.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sagnac/chsh.hpp"
#include "sagnac/polarization.hpp"
#include "sagnac/source.hpp"
#include "sagnac/tomography.hpp"

namespace sagnac {

enum class PlateErrorDistribution { Uniform, Gaussian };

enum class ErrorSource { Balance, CrystalOffset, Multipair, PlateSetting, PlateCalibration };

std::string to_string(ErrorSource source);
/// Accepts balance, crystal_offset, multipair, plate_setting, plate_calibration.
ErrorSource error_source_from_string(const std::string& name);
std::string to_string(PlateErrorDistribution distribution);
PlateErrorDistribution distribution_from_string(const std::string& name);

/// Calibrations of the four plates: analyzer A (signal) and B (idler).
struct AnalyzerCalibrations {
  PlateCalibration a_hwp = PlateCalibration::ideal_half_wave();
  PlateCalibration a_qwp = PlateCalibration::ideal_quarter_wave();
  PlateCalibration b_hwp = PlateCalibration::ideal_half_wave();
  PlateCalibration b_qwp = PlateCalibration::ideal_quarter_wave();

  /// The characterized plates of the reference setup.
  static AnalyzerCalibrations reference();
};

struct ExperimentPlan {
  std::variant<SourceParams, DensityMatrix> state = SourceParams{};
  /// Analyzer directions are read as a = alpha[0], a' = alpha[1], b = beta[0],
  /// b' = beta[2].
  ChshAngles angles = ChshAngles::canonical();
  double pair_rate = 4100.0;  ///< N, coincidences per second
  double integration_time_s = 60.0;
  int repetitions = 25;
  std::uint64_t seed = 0;
  /// Per-cell multiplier on the pair term (beam-steering loss hook).
  Eigen::Matrix4d efficiencies = Eigen::Matrix4d::Ones();

  void validate() const;
  DensityMatrix density_matrix() const;
};

/// Poisson means: N tau Tr(rho M_a x M_b) * efficiency plus accidentals
/// N tau <HV populations> * accidental_ratio(M_a, M_b).
CountGrid expected_chsh_counts(const ExperimentPlan& plan);
TomoCounts expected_tomo_counts(const ExperimentPlan& plan, const TomoSettings& settings);

/// One Poisson realization; cell (i, j) of repetition r draws from the
/// stream keyed by (seed, r, 4i + j).
CountGrid simulate_counts(const ExperimentPlan& plan, int repetition = 0);
TomoCounts simulate_tomo_counts(const ExperimentPlan& plan, const TomoSettings& settings,
                                int repetition = 0);

struct CampaignResult {
  std::vector<CountGrid> counts;
  std::vector<SResult> repetitions;
  CountGrid pooled_counts;
  SResult pooled;
  /// Fraction of repetitions with |S| > 2 sqrt(2).
  double fraction_above_bound = 0.0;
};

/// The pooled result comes from the cellwise summed counts.
CampaignResult run_chsh_campaign(const ExperimentPlan& plan);

struct SweepOptions {
  SourceParams base;  ///< geometry, efficiencies and window for the sweeps
  AnalyzerCalibrations calibrations = AnalyzerCalibrations::reference();
  PlateErrorDistribution distribution = PlateErrorDistribution::Uniform;
  int trials = 2000;
  std::uint64_t seed = 0;
};

struct SweepPoint {
  double parameter = 0.0;
  double fidelity = 1.0;
  double concurrence = 1.0;
  double tsirelson_gap = 0.0;
  double std_err = 0.0;
};

/// One curve per error source with every other error ideal. Parameters are
/// P for balance, z_c in mm for crystal_offset, p for multipair, the
/// plate angle error bound (or standard deviation) in degrees for
/// plate_setting and a multiplier on the calibration uncertainties for
/// plate_calibration. Plate sweeps are Monte-Carlo means over `trials`.
std::vector<SweepPoint> sweep_error_source(ErrorSource source, std::span<const double> values,
                                           const SweepOptions& options);

struct BudgetEntry {
  std::string source;
  double parameter = 0.0;
  double delta_s = 0.0;
  double std_err = 0.0;
};

struct ErrorBudget {
  std::vector<BudgetEntry> entries;  ///< descending delta_s
  double total = 0.0;
};

struct BudgetInputs {
  SourceParams params;
  AnalyzerCalibrations calibrations = AnalyzerCalibrations::reference();
  double plate_setting_error_deg = 0.1;
  PlateErrorDistribution distribution = PlateErrorDistribution::Uniform;
  int trials = 4000;
  std::uint64_t seed = 0;
};

/// Each error evaluated in isolation, sorted by descending impact.
ErrorBudget error_budget(const BudgetInputs& inputs);

}  // namespace sagnac
