#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sagnac/errors.hpp"
#include "sagnac/io.hpp"

using namespace sagnac;
using doctest::Approx;

namespace {

const std::string kData = SAGNAC_DATA_DIR;

std::string table_text() {
  std::ifstream f(kData + "/chsh_counts.csv");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string drop_line(const std::string& text, int line) {
  std::istringstream in(text);
  std::string out;
  std::string l;
  for (int i = 0; std::getline(in, l); ++i) {
    if (i != line) out += l + "\n";
  }
  return out;
}

std::string replace_line(const std::string& text, int line, const std::string& with) {
  std::istringstream in(text);
  std::string out;
  std::string l;
  for (int i = 0; std::getline(in, l); ++i) out += (i == line ? with : l) + "\n";
  return out;
}

// Swaps the A and B plate-angle columns of every data row.
std::string swap_analyzers(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  std::string l;
  for (int i = 0; std::getline(in, l); ++i) {
    if (i == 0 || l.empty() || l[0] == '#') {
      out += l + "\n";
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(l);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    out += f[2] + "," + f[3] + "," + f[0] + "," + f[1] + "," + f[4] + "\n";
  }
  return out;
}

std::string line_of(const std::string& text, int line) {
  std::istringstream in(text);
  std::string l;
  for (int i = 0; i <= line; ++i) std::getline(in, l);
  return l;
}

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_count_table(in);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("bundled count table") {
  const CountGrid g = parse_count_table(std::filesystem::path(kData + "/chsh_counts.csv"));
  CHECK(g.total() == 24602439.0);
  CHECK(g.counts(0, 0) == 431677.0);
  CHECK(g.counts(1, 0) == 2567446.0);
}

TEST_CASE("count table errors") {
  const std::string text = table_text();
  // The first data row is cell (a, b).
  const std::string missing = error_of(drop_line(text, 1));
  CHECK(missing.find("(a, b)") != std::string::npos);
  CHECK(missing.find("16") != std::string::npos);

  std::string neg = line_of(text, 3);
  neg = neg.substr(0, neg.rfind(',')) + ",-4";
  CHECK(error_of(replace_line(text, 3, neg)).find("negative") != std::string::npos);

  CHECK_FALSE(error_of(replace_line(text, 5, line_of(text, 4))).empty());
  CHECK_FALSE(error_of(replace_line(text, 0, "a,b,c,d,e")).empty());
  CHECK_FALSE(error_of(text + line_of(text, 2) + "\n").empty());
  CHECK_THROWS_AS(parse_count_table(std::filesystem::path("/nonexistent/table.csv")), InputError);
}

TEST_CASE("count table round trip") {
  const CountGrid g = parse_count_table(std::filesystem::path(kData + "/chsh_counts.csv"));
  std::stringstream ss;
  write_count_table(ss, g);
  const CountGrid back = parse_count_table(ss);
  CHECK(back.counts == g.counts);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.a_settings[i].hwp_angle == Approx(g.a_settings[i].hwp_angle).epsilon(1e-15));
    CHECK(back.a_settings[i].qwp_angle == Approx(g.a_settings[i].qwp_angle).epsilon(1e-15));
    CHECK(back.b_settings[i].hwp_angle == Approx(g.b_settings[i].hwp_angle).epsilon(1e-15));
    CHECK(back.b_settings[i].qwp_angle == Approx(g.b_settings[i].qwp_angle).epsilon(1e-15));
  }
  std::stringstream again;
  write_count_table(again, back);
  CHECK(again.str() == ss.str());
}

TEST_CASE("layout maps") {
  const LayoutMap a2 = LayoutMap::grouped_by_a();
  for (std::size_t r = 0; r < 16; ++r) {
    const auto [i, j] = a2.row(r);
    CHECK(a2.row_of(i, j) == r);
  }
  std::array<LayoutMap::Cell, 16> rows{};
  for (int r = 0; r < 16; ++r) rows[r] = {r % 4, r / 4};
  const LayoutMap transposed(rows);
  std::istringstream in(swap_analyzers(table_text()));
  const CountGrid t = parse_count_table(in, transposed);
  const CountGrid g = parse_count_table(std::filesystem::path(kData + "/chsh_counts.csv"));
  CHECK(t.counts == g.counts.transpose());

  rows[3] = rows[2];
  CHECK_THROWS_AS(LayoutMap{rows}, InputError);
  CHECK(cell_name(2, 1) == "(a', b_perp)");
}

TEST_CASE("calibration files") {
  const AnalyzerCalibrations file =
      parse_calibrations(std::filesystem::path(kData + "/analyzer_calibration.csv"));
  const AnalyzerCalibrations ref = AnalyzerCalibrations::reference();
  CHECK(file.a_hwp.retardance == Approx(ref.a_hwp.retardance).epsilon(1e-15));
  CHECK(file.b_qwp.zero_point == Approx(ref.b_qwp.zero_point).epsilon(1e-15));
  CHECK(file.a_qwp.zero_point_uncertainty == Approx(ref.a_qwp.zero_point_uncertainty));

  std::stringstream ss;
  write_calibrations(ss, ref);
  const AnalyzerCalibrations back = parse_calibrations(ss);
  CHECK(back.b_hwp.retardance == ref.b_hwp.retardance);
  CHECK(back.b_hwp.retardance_uncertainty == ref.b_hwp.retardance_uncertainty);

  std::istringstream bad(std::string(kCalibrationHeader) + "\nmystery_plate,3.1,0,0,0\n");
  CHECK_THROWS_AS(parse_calibrations(bad), InputError);
}

TEST_CASE("stokes sample files") {
  const auto samples = stokes_curve(AnalyzerCalibrations::reference().a_hwp, Ket2(1, 0),
                                    std::vector<double>{0.0, 0.3, 1.2});
  std::stringstream ss;
  write_stokes_samples(ss, samples);
  const auto back = parse_stokes_samples(ss);
  REQUIRE(back.size() == 3);
  CHECK(back[1].plate_angle == Approx(0.3).epsilon(1e-15));
  CHECK(back[2].stokes.s3 == samples[2].stokes.s3);
}

TEST_CASE("tomography count files") {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts counts =
      expected_tomo_counts(DensityMatrix::from_pure(make_bell_psi_minus()), s, 4000.0);
  std::stringstream ss;
  write_tomo_counts(ss, counts, s);
  const TomoCounts back = parse_tomo_counts(ss, s);
  CHECK(back.counts == counts.counts);

  std::string text = std::string(kTomoHeader) + "\n";
  for (int k = 15; k >= 0; --k) {
    const auto& st = s.settings[static_cast<std::size_t>(k)];
    text += st.label_a + "," + st.label_b + "," + std::to_string(k) + "\n";
  }
  std::istringstream reversed(text);
  const TomoCounts r = parse_tomo_counts(reversed, s);
  for (int k = 0; k < 16; ++k) CHECK(r.counts[static_cast<std::size_t>(k)] == k);

  std::istringstream missing(drop_line(text, 3));
  CHECK_THROWS_AS(parse_tomo_counts(missing, s), InputError);
}

TEST_CASE("density matrix JSON") {
  std::mt19937_64 rng(41);
  const DensityMatrix rho = oracle::random_mixed(rng);
  const nlohmann::json doc = density_matrix_to_json(rho);
  CHECK(doc.at("basis") == nlohmann::json({"HH", "HV", "VH", "VV"}));
  const DensityMatrix back = density_matrix_from_json(nlohmann::json::parse(doc.dump()));
  CHECK((back.matrix() - rho.matrix()).norm() == 0.0);

  nlohmann::json flat = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) flat.push_back({rho(i, j).real(), rho(i, j).imag()});
  }
  CHECK((density_matrix_from_json({{"matrix", flat}}).matrix() - rho.matrix()).norm() == 0.0);

  nlohmann::json skew = doc;
  skew["matrix"][0][1][0] = 0.3;
  CHECK_THROWS_AS(density_matrix_from_json(skew), InputError);
}

TEST_CASE("config files") {
  std::istringstream in(
      "# comment\n"
      "balance = 1.05   # trailing\n"
      "plate_error_distribution = \"gaussian\"\n"
      "seed = 12\n");
  const Config c = Config::parse(in);
  CHECK(c.get_double("balance", 0.0) == 1.05);
  CHECK(c.get_string("plate_error_distribution", "") == "gaussian");
  CHECK(c.get_int("seed", 0) == 12);
  CHECK(c.get_double("phase", 0.25) == 0.25);

  std::istringstream dup("seed = 1\nseed = 2\n");
  CHECK_THROWS_AS(Config::parse(dup), InputError);
  std::istringstream section("[source]\nbalance = 1\n");
  CHECK_THROWS_AS(Config::parse(section), InputError);
  std::istringstream unknown("balanse = 1\n");
  CHECK_THROWS_AS(source_params_from_config(Config::parse(unknown)), InputError);
  std::istringstream garbage("balance = lots\n");
  CHECK_THROWS_AS(source_params_from_config(Config::parse(garbage)), InputError);
}

TEST_CASE("bundled default config") {
  const Config c = Config::load(kData + "/reference.toml");
  const SourceParams p = source_params_from_config(c);
  CHECK(p.balance == 1.03);
  CHECK(p.crystal_offset_mm == 1.0);
  CHECK(p.multipair_ratio == 1.3e-5);
  const ExperimentPlan plan = plan_from_config(c);
  CHECK(plan.pair_rate == 4100.0);
  CHECK(plan.repetitions == 25);
  const AnalyzerCalibrations cal = calibrations_from_config(c);
  CHECK(cal.b_qwp.zero_point == Approx(AnalyzerCalibrations::reference().b_qwp.zero_point));
  const BudgetInputs b = budget_inputs_from_config(c);
  CHECK(b.plate_setting_error_deg == 0.1);
  CHECK(b.distribution == PlateErrorDistribution::Uniform);
}
