#include "sagnac/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw InputError(where + ": '" + text + "' is not a finite number");
  }
  return value;
}

// Reads non-empty, non-comment lines; the first must equal `header`.
std::vector<std::pair<int, std::vector<std::string>>> read_csv(std::istream& in,
                                                               const std::string& header,
                                                               std::size_t columns) {
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!seen_header) {
      std::string normalized;
      for (const auto& f : split_csv(t)) normalized += (normalized.empty() ? "" : ",") + f;
      if (normalized != header) {
        throw InputError("line " + std::to_string(line_no) + ": expected header '" + header +
                         "', got '" + t + "'");
      }
      seen_header = true;
      continue;
    }
    auto fields = split_csv(t);
    if (fields.size() != columns) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
    }
    rows.emplace_back(line_no, std::move(fields));
  }
  if (!seen_header) throw InputError("missing header '" + header + "'");
  return rows;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

std::string format_number(double v) {
  if (std::abs(v) < 1e15 && v == std::floor(v)) {
    std::ostringstream ss;
    ss << static_cast<long long>(v);
    return ss.str();
  }
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

std::string format_angle(double radians) {
  std::ostringstream ss;
  ss << std::setprecision(17) << radians / kDeg;
  return ss.str();
}

constexpr std::array<const char*, 4> kANames{"a", "a_perp", "a'", "a'_perp"};
constexpr std::array<const char*, 4> kBNames{"b", "b_perp", "b'", "b'_perp"};

const std::array<std::string, 4> kPlateIds{"signal_hwp", "signal_qwp", "idler_hwp", "idler_qwp"};

PlateCalibration* plate_slot(AnalyzerCalibrations& cal, const std::string& id) {
  if (id == kPlateIds[0]) return &cal.a_hwp;
  if (id == kPlateIds[1]) return &cal.a_qwp;
  if (id == kPlateIds[2]) return &cal.b_hwp;
  if (id == kPlateIds[3]) return &cal.b_qwp;
  return nullptr;
}

}  // namespace

LayoutMap::LayoutMap(const std::array<Cell, 16>& rows) : rows_(rows) {
  std::set<Cell> seen;
  for (const auto& [a, b] : rows_) {
    if (a < 0 || a > 3 || b < 0 || b > 3) {
      throw InputError("layout map cell (" + std::to_string(a) + ", " + std::to_string(b) +
                       ") is out of range");
    }
    if (!seen.insert({a, b}).second) {
      throw InputError("layout map is not bijective: " + cell_name(a, b) + " appears twice");
    }
  }
}

LayoutMap LayoutMap::grouped_by_a() {
  std::array<Cell, 16> rows;
  for (int r = 0; r < 16; ++r) rows[static_cast<std::size_t>(r)] = {r / 4, r % 4};
  return LayoutMap(rows);
}

std::size_t LayoutMap::row_of(int a_index, int b_index) const {
  for (std::size_t r = 0; r < 16; ++r) {
    if (rows_[r] == Cell{a_index, b_index}) return r;
  }
  throw InputError("layout has no row for " + cell_name(a_index, b_index));
}

std::string cell_name(int a_index, int b_index) {
  if (a_index < 0 || a_index > 3 || b_index < 0 || b_index > 3) return "(?, ?)";
  return std::string("(") + kANames[static_cast<std::size_t>(a_index)] + ", " +
         kBNames[static_cast<std::size_t>(b_index)] + ")";
}

namespace {

using CsvRows = std::vector<std::pair<int, std::vector<std::string>>>;

// Layout positions that could be absent from a short table: skipping them
// leaves every A and B setting with a single, distinct pair of angles.
std::vector<std::size_t> missing_candidates(const CsvRows& rows, const LayoutMap& layout) {
  std::vector<std::size_t> out;
  const std::size_t gaps = 16 - rows.size();
  if (gaps != 1) return out;
  for (std::size_t skip = 0; skip < 16; ++skip) {
    std::array<std::set<std::pair<std::string, std::string>>, 4> a_angles;
    std::array<std::set<std::pair<std::string, std::string>>, 4> b_angles;
    std::size_t r = 0;
    for (std::size_t pos = 0; pos < 16; ++pos) {
      if (pos == skip) continue;
      const auto& f = rows[r++].second;
      const auto& [a, b] = layout.row(pos);
      a_angles[static_cast<std::size_t>(a)].insert({f[0], f[1]});
      b_angles[static_cast<std::size_t>(b)].insert({f[2], f[3]});
    }
    bool consistent = true;
    std::set<std::pair<std::string, std::string>> a_all;
    std::set<std::pair<std::string, std::string>> b_all;
    for (std::size_t k = 0; k < 4; ++k) {
      consistent = consistent && a_angles[k].size() == 1 && b_angles[k].size() == 1;
      if (!consistent) break;
      a_all.insert(*a_angles[k].begin());
      b_all.insert(*b_angles[k].begin());
    }
    if (consistent && a_all.size() == 4 && b_all.size() == 4) out.push_back(skip);
  }
  return out;
}

}  // namespace

CountGrid parse_count_table(std::istream& in, const LayoutMap& layout) {
  const auto rows = read_csv(in, kCountTableHeader, 5);
  if (rows.size() > 16) {
    throw InputError("count table has " + std::to_string(rows.size()) +
                     " data rows, expected 16");
  }
  if (rows.size() < 16) {
    std::vector<std::size_t> positions = missing_candidates(rows, layout);
    const char* sep = " or ";
    if (positions.empty()) {
      sep = ", ";
      for (std::size_t r = rows.size(); r < 16; ++r) positions.push_back(r);
    }
    std::string missing;
    for (std::size_t r : positions) {
      const auto& [a, b] = layout.row(r);
      missing += (missing.empty() ? "" : sep) + cell_name(a, b);
    }
    throw InputError("count table has " + std::to_string(rows.size()) +
                     " data rows, expected 16; missing " + missing);
  }

  CountGrid grid;
  std::array<bool, 4> a_seen{};
  std::array<bool, 4> b_seen{};
  std::set<std::array<double, 4>> settings_seen;
  for (std::size_t r = 0; r < 16; ++r) {
    const auto& [line_no, f] = rows[r];
    const std::string where = "line " + std::to_string(line_no);
    std::array<double, 4> deg{};
    for (std::size_t k = 0; k < 4; ++k) deg[k] = parse_number(f[k], where);
    const double n = parse_number(f[4], where);
    if (n < 0.0) throw InputError(where + ": negative coincidence count " + f[4]);
    if (!settings_seen.insert(deg).second) {
      throw InputError(where + ": duplicate setting row (" + f[0] + ", " + f[1] + ", " + f[2] +
                       ", " + f[3] + ")");
    }
    const auto& [a, b] = layout.row(r);
    grid.counts(a, b) = n;

    PlateSetting sa;
    sa.hwp_angle = deg[0] * kDeg;
    sa.qwp_angle = deg[1] * kDeg;
    PlateSetting sb;
    sb.hwp_angle = deg[2] * kDeg;
    sb.qwp_angle = deg[3] * kDeg;
    auto check_consistent = [&](bool& seen, PlateSetting& slot, const PlateSetting& s,
                                const std::string& name) {
      if (seen && (slot.hwp_angle != s.hwp_angle || slot.qwp_angle != s.qwp_angle)) {
        throw InputError(where + ": setting " + name + " has inconsistent plate angles");
      }
      seen = true;
      slot = s;
    };
    check_consistent(a_seen[static_cast<std::size_t>(a)], grid.a_settings[static_cast<std::size_t>(a)],
                     sa, kANames[static_cast<std::size_t>(a)]);
    check_consistent(b_seen[static_cast<std::size_t>(b)], grid.b_settings[static_cast<std::size_t>(b)],
                     sb, kBNames[static_cast<std::size_t>(b)]);
  }
  return grid;
}

CountGrid parse_count_table(const std::filesystem::path& path, const LayoutMap& layout) {
  auto in = open_input(path);
  try {
    return parse_count_table(in, layout);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_count_table(std::ostream& out, const CountGrid& grid, const LayoutMap& layout) {
  out << kCountTableHeader << '\n';
  for (std::size_t r = 0; r < 16; ++r) {
    const auto& [a, b] = layout.row(r);
    const PlateSetting& sa = grid.a_settings[static_cast<std::size_t>(a)];
    const PlateSetting& sb = grid.b_settings[static_cast<std::size_t>(b)];
    out << format_angle(sa.hwp_angle) << ',' << format_angle(sa.qwp_angle) << ','
        << format_angle(sb.hwp_angle) << ',' << format_angle(sb.qwp_angle) << ','
        << format_number(grid.counts(a, b)) << '\n';
  }
}

AnalyzerCalibrations parse_calibrations(std::istream& in) {
  AnalyzerCalibrations cal;
  std::set<std::string> seen;
  for (const auto& [line_no, f] : read_csv(in, kCalibrationHeader, 5)) {
    const std::string where = "line " + std::to_string(line_no);
    PlateCalibration* slot = plate_slot(cal, f[0]);
    if (slot == nullptr) {
      throw InputError(where + ": unknown plate id '" + f[0] +
                       "' (expected signal_hwp, signal_qwp, idler_hwp or idler_qwp)");
    }
    if (!seen.insert(f[0]).second) throw InputError(where + ": duplicate plate id " + f[0]);
    slot->retardance = parse_number(f[1], where);
    slot->retardance_uncertainty = parse_number(f[2], where);
    slot->zero_point = parse_number(f[3], where);
    slot->zero_point_uncertainty = parse_number(f[4], where);
    slot->validate();
  }
  return cal;
}

AnalyzerCalibrations parse_calibrations(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_calibrations(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_calibrations(std::ostream& out, const AnalyzerCalibrations& cal) {
  out << kCalibrationHeader << '\n' << std::setprecision(17);
  const std::array<const PlateCalibration*, 4> plates{&cal.a_hwp, &cal.a_qwp, &cal.b_hwp,
                                                      &cal.b_qwp};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& p = *plates[k];
    out << kPlateIds[k] << ',' << p.retardance << ',' << p.retardance_uncertainty << ','
        << p.zero_point << ',' << p.zero_point_uncertainty << '\n';
  }
}

std::vector<StokesSample> parse_stokes_samples(std::istream& in) {
  std::vector<StokesSample> out;
  for (const auto& [line_no, f] : read_csv(in, kStokesHeader, 5)) {
    const std::string where = "line " + std::to_string(line_no);
    StokesSample s;
    s.plate_angle = parse_number(f[0], where) * kDeg;
    s.stokes.s0 = parse_number(f[1], where);
    s.stokes.s1 = parse_number(f[2], where);
    s.stokes.s2 = parse_number(f[3], where);
    s.stokes.s3 = parse_number(f[4], where);
    if (!(s.stokes.s0 > 0.0)) throw InputError(where + ": s0 must be positive");
    out.push_back(s);
  }
  return out;
}

std::vector<StokesSample> parse_stokes_samples(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_stokes_samples(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_stokes_samples(std::ostream& out, const std::vector<StokesSample>& samples) {
  out << kStokesHeader << '\n' << std::setprecision(17);
  for (const auto& s : samples) {
    out << format_angle(s.plate_angle) << ',' << s.stokes.s0 << ',' << s.stokes.s1 << ','
        << s.stokes.s2 << ',' << s.stokes.s3 << '\n';
  }
}

TomoCounts parse_tomo_counts(std::istream& in, const TomoSettings& settings) {
  TomoCounts out;
  std::vector<bool> seen(settings.settings.size(), false);
  for (const auto& [line_no, f] : read_csv(in, kTomoHeader, 3)) {
    const std::string where = "line " + std::to_string(line_no);
    std::size_t index = 0;
    try {
      index = settings.index_of(f[0], f[1]);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (seen[index]) throw InputError(where + ": duplicate setting (" + f[0] + ", " + f[1] + ")");
    seen[index] = true;
    const double n = parse_number(f[2], where);
    if (n < 0.0) throw InputError(where + ": negative count " + f[2]);
    out.counts[index] = n;
  }
  std::string missing;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      missing += (missing.empty() ? "" : ", ") + std::string("(") + settings.settings[i].label_a +
                 ", " + settings.settings[i].label_b + ")";
    }
  }
  if (!missing.empty()) throw InputError("tomography counts missing settings " + missing);
  return out;
}

TomoCounts parse_tomo_counts(const std::filesystem::path& path, const TomoSettings& settings) {
  auto in = open_input(path);
  try {
    return parse_tomo_counts(in, settings);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_tomo_counts(std::ostream& out, const TomoCounts& counts, const TomoSettings& settings) {
  out << kTomoHeader << '\n';
  for (std::size_t i = 0; i < settings.settings.size(); ++i) {
    out << settings.settings[i].label_a << ',' << settings.settings[i].label_b << ','
        << format_number(counts.counts[i]) << '\n';
  }
}

nlohmann::json density_matrix_to_json(const DensityMatrix& rho) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 4; ++c) row.push_back({rho(r, c).real(), rho(r, c).imag()});
    rows.push_back(row);
  }
  return {{"basis", {"HH", "HV", "VH", "VV"}},
          {"constraint", rho.unconstrained() ? "unconstrained" : "physical"},
          {"matrix", rows}};
}

DensityMatrix density_matrix_from_json(const nlohmann::json& doc) {
  try {
    if (doc.contains("basis") &&
        doc.at("basis") != nlohmann::json({"HH", "HV", "VH", "VV"})) {
      throw InputError("density matrix basis must be [HH, HV, VH, VV]");
    }
    const auto& m = doc.at("matrix");
    std::vector<nlohmann::json> pairs;
    if (m.size() == 4 && m.at(0).is_array() && m.at(0).size() == 4 && m.at(0).at(0).is_array()) {
      for (const auto& row : m) {
        if (row.size() != 4) throw InputError("density matrix rows must have 4 entries");
        for (const auto& e : row) pairs.push_back(e);
      }
    } else if (m.size() == 16) {
      for (const auto& e : m) pairs.push_back(e);
    } else {
      throw InputError("density matrix must be 4x4 [re, im] pairs");
    }
    Matrix4c entries;
    for (int k = 0; k < 16; ++k) {
      const auto& e = pairs[static_cast<std::size_t>(k)];
      if (!e.is_array() || e.size() != 2) throw InputError("matrix entries must be [re, im]");
      entries(k / 4, k % 4) = Complex(e.at(0).get<double>(), e.at(1).get<double>());
    }
    const bool unconstrained = doc.value("constraint", std::string("physical")) == "unconstrained";
    return DensityMatrix(entries, unconstrained ? DensityMatrix::Constraint::Unconstrained
                                                : DensityMatrix::Constraint::Physical);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed density matrix JSON: ") + e.what());
  }
}

Config Config::parse(std::istream& in, const std::string& origin) {
  Config config;
  config.origin_ = origin;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    std::string body = line;
    bool in_quotes = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') in_quotes = !in_quotes;
      if (body[i] == '#' && !in_quotes) {
        body.resize(i);
        break;
      }
    }
    body = trim(body);
    if (body.empty()) continue;
    if (body.front() == '[') throw InputError(where + ": sections are not supported");
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw InputError(where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!config.values_.emplace(key, value).second) {
      throw InputError(where + ": duplicate key '" + key + "'");
    }
  }
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  Config config = parse(in, path.string());
  config.base_dir_ = path.parent_path();
  return config;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_number(it->second, origin_ + ": key '" + key + "'");
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(origin_ + ": key '" + key + "': '" + s + "' is not an integer");
  }
  return value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

void Config::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError(origin_ + ": unknown key '" + key + "'");
    }
  }
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "balance", "phase", "crystal_offset_mm", "multipair_ratio", "efficiency_a",
      "efficiency_b", "coincidence_window_ps",
      // geometry
      "length_mm", "pump_index", "group_index_ordinary", "group_index_extraordinary",
      "waist_pump_um", "waist_signal_um", "waist_idler_um", "pump_wavelength_nm",
      "photon_wavelength_nm", "wavepacket_fwhm_ps", "degenerate_temperature_c",
      // experiment
      "pair_rate", "integration_time_s", "repetitions", "seed", "trials",
      "plate_setting_error_deg", "plate_error_distribution", "calibration_file",
      "tomography_flux",
      // sweeps
      "sweep_min", "sweep_max", "sweep_points"};
  return keys;
}

SourceParams source_params_from_config(const Config& config) {
  config.require_known(known_config_keys());
  SourceParams p;
  p.balance = config.get_double("balance", p.balance);
  p.phase = config.get_double("phase", p.phase);
  p.crystal_offset_mm = config.get_double("crystal_offset_mm", p.crystal_offset_mm);
  p.multipair_ratio = config.get_double("multipair_ratio", p.multipair_ratio);
  p.efficiency_a = config.get_double("efficiency_a", p.efficiency_a);
  p.efficiency_b = config.get_double("efficiency_b", p.efficiency_b);
  p.coincidence_window_ps = config.get_double("coincidence_window_ps", p.coincidence_window_ps);
  CrystalGeometry& g = p.geometry;
  g.length_mm = config.get_double("length_mm", g.length_mm);
  g.pump_index = config.get_double("pump_index", g.pump_index);
  g.group_index_ordinary = config.get_double("group_index_ordinary", g.group_index_ordinary);
  g.group_index_extraordinary =
      config.get_double("group_index_extraordinary", g.group_index_extraordinary);
  g.waist_pump_um = config.get_double("waist_pump_um", g.waist_pump_um);
  g.waist_signal_um = config.get_double("waist_signal_um", g.waist_signal_um);
  g.waist_idler_um = config.get_double("waist_idler_um", g.waist_idler_um);
  g.pump_wavelength_nm = config.get_double("pump_wavelength_nm", g.pump_wavelength_nm);
  g.photon_wavelength_nm = config.get_double("photon_wavelength_nm", g.photon_wavelength_nm);
  g.wavepacket_fwhm_ps = config.get_double("wavepacket_fwhm_ps", g.wavepacket_fwhm_ps);
  g.degenerate_temperature_c =
      config.get_double("degenerate_temperature_c", g.degenerate_temperature_c);
  p.validate();
  return p;
}

ExperimentPlan plan_from_config(const Config& config) {
  ExperimentPlan plan;
  plan.state = source_params_from_config(config);
  plan.pair_rate = config.get_double("pair_rate", plan.pair_rate);
  plan.integration_time_s = config.get_double("integration_time_s", plan.integration_time_s);
  plan.repetitions = static_cast<int>(config.get_int("repetitions", plan.repetitions));
  const long long seed = config.get_int("seed", 0);
  if (seed < 0) throw InputError("seed must be non-negative");
  plan.seed = static_cast<std::uint64_t>(seed);
  plan.validate();
  return plan;
}

AnalyzerCalibrations calibrations_from_config(const Config& config) {
  if (!config.has("calibration_file")) return AnalyzerCalibrations::reference();
  std::filesystem::path path = config.get_string("calibration_file", "");
  if (path.is_relative()) path = config.base_dir() / path;
  return parse_calibrations(path);
}

BudgetInputs budget_inputs_from_config(const Config& config) {
  BudgetInputs in;
  in.params = source_params_from_config(config);
  in.calibrations = calibrations_from_config(config);
  in.plate_setting_error_deg =
      config.get_double("plate_setting_error_deg", in.plate_setting_error_deg);
  in.distribution =
      distribution_from_string(config.get_string("plate_error_distribution", "uniform"));
  in.trials = static_cast<int>(config.get_int("trials", in.trials));
  const long long seed = config.get_int("seed", 0);
  if (seed < 0) throw InputError("seed must be non-negative");
  in.seed = static_cast<std::uint64_t>(seed);
  return in;
}

}  // namespace sagnac
