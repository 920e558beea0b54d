#pragma once

// File formats: count tables, calibration tables, Stokes samples,
// tomography counts, density-matrix JSON and the flat key = value config.
// Angles are degrees in files and radians in memory.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sagnac/chsh.hpp"
#include "sagnac/expsim.hpp"
#include "sagnac/polarization.hpp"
#include "sagnac/qstate.hpp"
#include "sagnac/source.hpp"
#include "sagnac/tomography.hpp"

namespace sagnac {

/// Maps each of the 16 data rows of a count table to a CountGrid cell
/// (A index, B index).
class LayoutMap {
 public:
  using Cell = std::pair<int, int>;

  /// Throws InputError unless the mapping is a bijection onto the 4x4 cells.
  explicit LayoutMap(const std::array<Cell, 16>& rows);

  /// Four groups of four rows, one group per A setting (a, a_perp, a',
  /// a'_perp); inside a group the B settings run (b, b_perp, b', b'_perp).
  static LayoutMap grouped_by_a();

  const Cell& row(std::size_t index) const { return rows_.at(index); }
  std::size_t row_of(int a_index, int b_index) const;

 private:
  std::array<Cell, 16> rows_;
};

/// Human-readable cell name such as "(a', b_perp)".
std::string cell_name(int a_index, int b_index);

inline constexpr const char* kCountTableHeader =
    "a_hwp_deg,a_qwp_deg,b_hwp_deg,b_qwp_deg,coincidences";

/// Parses `a_hwp_deg,a_qwp_deg,b_hwp_deg,b_qwp_deg,coincidences` with exactly
/// 16 data rows. Plate calibrations in the result are ideal; the angles are
/// kept raw.
CountGrid parse_count_table(std::istream& in, const LayoutMap& layout = LayoutMap::grouped_by_a());
CountGrid parse_count_table(const std::filesystem::path& path,
                            const LayoutMap& layout = LayoutMap::grouped_by_a());
void write_count_table(std::ostream& out, const CountGrid& grid,
                       const LayoutMap& layout = LayoutMap::grouped_by_a());

inline constexpr const char* kCalibrationHeader =
    "plate_id,retardance_rad,retardance_unc_rad,zero_point_rad,zero_point_unc_rad";

/// Plate ids: signal_hwp, signal_qwp, idler_hwp, idler_qwp. Missing plates
/// stay ideal.
AnalyzerCalibrations parse_calibrations(std::istream& in);
AnalyzerCalibrations parse_calibrations(const std::filesystem::path& path);
void write_calibrations(std::ostream& out, const AnalyzerCalibrations& cal);

inline constexpr const char* kStokesHeader = "plate_angle_deg,s0,s1,s2,s3";

std::vector<StokesSample> parse_stokes_samples(std::istream& in);
std::vector<StokesSample> parse_stokes_samples(const std::filesystem::path& path);
void write_stokes_samples(std::ostream& out, const std::vector<StokesSample>& samples);

inline constexpr const char* kTomoHeader = "label_a,label_b,counts";

/// Rows may come in any order; every (label_a, label_b) of `settings` must
/// appear exactly once.
TomoCounts parse_tomo_counts(std::istream& in, const TomoSettings& settings);
TomoCounts parse_tomo_counts(const std::filesystem::path& path, const TomoSettings& settings);
void write_tomo_counts(std::ostream& out, const TomoCounts& counts, const TomoSettings& settings);

/// {"basis": ["HH","HV","VH","VV"], "constraint": ..., "matrix": 4 rows of
/// 4 [re, im] pairs}.
nlohmann::json density_matrix_to_json(const DensityMatrix& rho);
/// Accepts the nested form or a flat row-major list of 16 pairs. Rejects
/// matrices failing the Hermiticity tolerance.
DensityMatrix density_matrix_from_json(const nlohmann::json& doc);

/// Flat `key = value` configuration. `#` starts a comment; string values may
/// be quoted. Duplicate keys and section headers are rejected.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  const std::map<std::string, std::string>& values() const { return values_; }
  /// Directory of the file, for resolving relative paths.
  const std::filesystem::path& base_dir() const { return base_dir_; }

  /// Throws InputError naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
  std::filesystem::path base_dir_;
};

/// Every key the toolkit understands.
const std::vector<std::string>& known_config_keys();

SourceParams source_params_from_config(const Config& config);
/// Source state from the config; pair_rate, integration_time_s, repetitions
/// and seed as given.
ExperimentPlan plan_from_config(const Config& config);
/// Calibration file named by `calibration_file` (relative to the config), or
/// the reference calibrations when absent.
AnalyzerCalibrations calibrations_from_config(const Config& config);
BudgetInputs budget_inputs_from_config(const Config& config);

}  // namespace sagnac
