#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "sagnac/chsh.hpp"
#include "sagnac/errors.hpp"
#include "sagnac/expsim.hpp"
#include "sagnac/io.hpp"
#include "sagnac/polarization.hpp"
#include "sagnac/tomography.hpp"

namespace sagnac::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format;  // empty: text report on stdout
  std::optional<int> trials;
};

struct Report {
  std::string text;
  json doc;
  std::string csv;  // rows without the echo header
};

// "# key = value" lines so every CSV artifact carries its own provenance.
std::string csv_echo(const json& doc) {
  std::string out;
  if (doc.contains("seed")) out += fmt::format("# seed = {}\n", doc.at("seed").dump());
  if (doc.contains("input")) out += fmt::format("# input = {}\n", doc.at("input").get<std::string>());
  if (doc.contains("config")) {
    for (const auto& [k, v] : doc.at("config").items()) {
      out += fmt::format("# {} = {}\n", k, v.get<std::string>());
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << content;
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void emit(const Globals& g, const Report& report, std::ostream& out) {
  const std::string echo = csv_echo(report.doc);
  if (g.format == "json") {
    out << report.doc.dump(2) << '\n';
  } else if (g.format == "csv") {
    out << echo << report.csv;
  } else {
    out << report.text;
  }
  if (!g.out_dir.empty()) {
    if (g.format == "csv") {
      write_file(out_path(g, "report.csv"), echo + report.csv);
    } else {
      write_file(out_path(g, "report.json"), report.doc.dump(2) + "\n");
    }
  }
}

json config_echo(const Config& config) {
  json doc = json::object();
  for (const auto& [k, v] : config.values()) doc[k] = v;
  return doc;
}

std::uint64_t resolve_seed(const Globals& g, const Config* config) {
  if (g.seed) return *g.seed;
  if (config != nullptr) {
    const long long s = config->get_int("seed", 0);
    if (s < 0) throw InputError("seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  return 0;
}

int resolve_trials(const Globals& g, const Config* config, int fallback) {
  int trials = fallback;
  if (config != nullptr) trials = static_cast<int>(config->get_int("trials", trials));
  if (g.trials) trials = *g.trials;
  if (trials < 1) throw InputError("--trials must be positive");
  return trials;
}

json s_result_json(const SResult& r) {
  return {{"s", r.s},
          {"abs_s", r.magnitude()},
          {"delta_s", r.delta_s},
          {"tsirelson_gap", r.tsirelson_gap()},
          {"e", r.e},
          {"delta_e", r.delta_e},
          {"total_counts", r.total_counts}};
}

std::string s_result_text(const SResult& r) {
  std::string t;
  for (std::size_t i = 0; i < 4; ++i) {
    t += fmt::format("E_{} = {:+.5f} ± {:.5f}\n", i, r.e[i], r.delta_e[i]);
  }
  t += fmt::format("S = {:+.6f} ± {:.6f} (signed)\n", r.s, r.delta_s);
  t += fmt::format("|S| = {:.6f} ± {:.6f}\n", r.magnitude(), r.delta_s);
  t += fmt::format("2√2 − S = {} ± {}\n", sci(r.tsirelson_gap(), 3), sci(r.delta_s, 2));
  return t;
}

std::string s_result_csv(const SResult& r) {
  std::string c = "quantity,value,uncertainty\n";
  for (std::size_t i = 0; i < 4; ++i) {
    c += fmt::format("E_{},{:.17g},{:.17g}\n", i, r.e[i], r.delta_e[i]);
  }
  c += fmt::format("S,{:.17g},{:.17g}\n", r.s, r.delta_s);
  c += fmt::format("abs_S,{:.17g},{:.17g}\n", r.magnitude(), r.delta_s);
  c += fmt::format("tsirelson_gap,{:.17g},{:.17g}\n", r.tsirelson_gap(), r.delta_s);
  c += fmt::format("total_counts,{:.17g},\n", r.total_counts);
  return c;
}

int analyze_counts(const Globals& g, const std::string& file, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const CountGrid grid = parse_count_table(fs::path(file));
  const SResult r = s_from_count_grid(grid);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Report rep;
  rep.doc = s_result_json(r);
  rep.doc["command"] = "analyze-counts";
  rep.doc["input"] = file;
  rep.doc["layout"] = "grouped_by_a";
  rep.text = fmt::format("input: {}\nlayout: grouped_by_a (rows grouped by A setting)\n", file);
  rep.text += fmt::format("total counts: {}\n", static_cast<long long>(r.total_counts));
  rep.text += s_result_text(r);
  rep.text += fmt::format("elapsed: {:.3f} s\n", seconds);
  rep.csv = s_result_csv(r);
  emit(g, rep, out);
  return kExitOk;
}

int simulate_chsh(const Globals& g, const std::string& config_path, std::ostream& out) {
  const Config config = Config::load(config_path);
  ExperimentPlan plan = plan_from_config(config);
  plan.seed = resolve_seed(g, &config);
  const CampaignResult campaign = run_chsh_campaign(plan);

  Report rep;
  rep.doc = {{"command", "simulate-chsh"},
             {"input", config_path},
             {"seed", plan.seed},
             {"config", config_echo(config)},
             {"pooled", s_result_json(campaign.pooled)},
             {"fraction_above_bound", campaign.fraction_above_bound}};
  json reps = json::array();
  rep.text = fmt::format("config: {}\nseed: {}\nrepetitions: {}\n", config_path, plan.seed,
                         plan.repetitions);
  rep.csv = "repetition,s,abs_s,delta_s,tsirelson_gap,total_counts\n";
  for (std::size_t i = 0; i < campaign.repetitions.size(); ++i) {
    const SResult& r = campaign.repetitions[i];
    reps.push_back(s_result_json(r));
    rep.text += fmt::format("  rep {:2d}: |S| = {:.6f} ± {:.6f}\n", i + 1, r.magnitude(),
                            r.delta_s);
    rep.csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", i + 1, r.s,
                           r.magnitude(), r.delta_s, r.tsirelson_gap(), r.total_counts);
  }
  const SResult& p = campaign.pooled;
  rep.csv += fmt::format("pooled,{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.s, p.magnitude(),
                         p.delta_s, p.tsirelson_gap(), p.total_counts);
  rep.doc["repetitions"] = reps;
  rep.text += fmt::format("pooled (summed counts, total {}):\n",
                          static_cast<long long>(p.total_counts));
  rep.text += s_result_text(p);
  rep.text += fmt::format("repetitions above 2√2: {:.2f}\n", campaign.fraction_above_bound);
  emit(g, rep, out);

  if (!g.out_dir.empty()) {
    std::ostringstream table;
    table << csv_echo(rep.doc);
    write_count_table(table, campaign.pooled_counts);
    write_file(out_path(g, "pooled_counts.csv"), table.str());
  }
  return kExitOk;
}

json metrics_json(const DensityMatrix& rho) {
  const Eigen::Vector4d ev = rho.eigenvalues();
  return {{"fidelity", fidelity_to_pure(rho, make_bell_psi_minus())},
          {"concurrence", concurrence(rho)},
          {"abs_s", std::abs(s_of_state(rho, ChshAngles::canonical()))},
          {"eigenvalues", {ev(0), ev(1), ev(2), ev(3)}}};
}

int tomography(const Globals& g, const std::string& input, std::ostream& out) {
  const TomoSettings settings = standard_tomo_settings();
  TomoCounts counts;
  std::optional<Config> config;
  if (fs::path(input).extension() == ".csv") {
    counts = parse_tomo_counts(fs::path(input), settings);
  } else {
    config = Config::load(input);
    ExperimentPlan plan = plan_from_config(*config);
    plan.seed = resolve_seed(g, &*config);
    const double flux =
        config->get_double("tomography_flux", plan.pair_rate * plan.integration_time_s);
    plan.pair_rate = flux;
    plan.integration_time_s = 1.0;
    counts = simulate_tomo_counts(plan, settings);
  }
  const std::uint64_t seed = resolve_seed(g, config ? &*config : nullptr);
  const int trials = g.trials ? *g.trials : 1000;

  const DensityMatrix linear = linear_inversion(counts, settings);
  const MleResult mle = mle_reconstruct(counts, settings);
  MonteCarloOptions mc_opts;
  mc_opts.trials = trials;
  mc_opts.seed = seed;
  const MonteCarloMetrics mc = monte_carlo_metrics(counts, settings, mc_opts);

  Report rep;
  rep.doc = {{"command", "tomography"},
             {"input", input},
             {"seed", seed},
             {"trials", trials},
             {"condition_number", settings.condition_number},
             {"linear_inversion", metrics_json(linear)},
             {"mle", metrics_json(mle.state)},
             {"mle_log_likelihood", mle.log_likelihood},
             {"monte_carlo",
              {{"fidelity_mean", mc.fidelity_summary.mean},
               {"fidelity_std", mc.fidelity_summary.stddev},
               {"concurrence_mean", mc.concurrence_summary.mean},
               {"concurrence_std", mc.concurrence_summary.stddev},
               {"abs_s_mean", mc.s_summary.mean},
               {"abs_s_std", mc.s_summary.stddev},
               {"failed_trials", mc.failed_trials}}}};
  if (config) rep.doc["config"] = config_echo(*config);
  if (config) {
    json c = json::array();
    for (std::size_t i = 0; i < 16; ++i) c.push_back(counts.counts[i]);
    rep.doc["simulated_counts"] = c;
  }

  const auto& lm = rep.doc["linear_inversion"];
  const auto& mm = rep.doc["mle"];
  rep.text = fmt::format("input: {}\nseed: {}\ncondition number: {:.3f}\n", input, seed,
                         settings.condition_number);
  rep.text += fmt::format("linear inversion: F = {:.6f}, C = {:.6f}, min eigenvalue = {}\n",
                          lm["fidelity"].get<double>(), lm["concurrence"].get<double>(),
                          sci(linear.min_eigenvalue(), 3));
  rep.text += fmt::format("MLE: F = {:.6f}, C = {:.6f}, |S| = {:.6f}\n",
                          mm["fidelity"].get<double>(), mm["concurrence"].get<double>(),
                          mm["abs_s"].get<double>());
  rep.text += fmt::format(
      "Monte-Carlo ({} trials): F = {:.6f} ± {:.6f}, C = {:.6f} ± {:.6f}, |S| = {:.6f} ± {:.6f}\n",
      trials, mc.fidelity_summary.mean, mc.fidelity_summary.stddev, mc.concurrence_summary.mean,
      mc.concurrence_summary.stddev, mc.s_summary.mean, mc.s_summary.stddev);
  rep.csv = "estimator,fidelity,concurrence,abs_s\n";
  rep.csv += fmt::format("linear_inversion,{:.17g},{:.17g},{:.17g}\n", lm["fidelity"].get<double>(),
                         lm["concurrence"].get<double>(), lm["abs_s"].get<double>());
  rep.csv += fmt::format("mle,{:.17g},{:.17g},{:.17g}\n", mm["fidelity"].get<double>(),
                         mm["concurrence"].get<double>(), mm["abs_s"].get<double>());
  rep.csv += fmt::format("monte_carlo_mean,{:.17g},{:.17g},{:.17g}\n", mc.fidelity_summary.mean,
                         mc.concurrence_summary.mean, mc.s_summary.mean);
  rep.csv += fmt::format("monte_carlo_std,{:.17g},{:.17g},{:.17g}\n", mc.fidelity_summary.stddev,
                         mc.concurrence_summary.stddev, mc.s_summary.stddev);
  emit(g, rep, out);

  if (!g.out_dir.empty()) {
    write_file(out_path(g, "linear_inversion.json"), density_matrix_to_json(linear).dump(2) + "\n");
    write_file(out_path(g, "mle.json"), density_matrix_to_json(mle.state).dump(2) + "\n");
    json metrics = rep.doc;
    write_file(out_path(g, "metrics.json"), metrics.dump(2) + "\n");
  }
  return kExitOk;
}

std::vector<double> sweep_grid(ErrorSource source, const Config& config) {
  double lo = 0.0;
  double hi = 0.0;
  long long points = 21;
  switch (source) {
    case ErrorSource::Balance:
      lo = 1.0;
      hi = 1.2;
      break;
    case ErrorSource::CrystalOffset:
      lo = 0.0;
      hi = 2.0;
      break;
    case ErrorSource::Multipair:
      lo = 0.0;
      hi = 1e-4;
      break;
    case ErrorSource::PlateSetting:
      lo = 0.0;
      hi = 0.5;
      points = 11;
      break;
    case ErrorSource::PlateCalibration:
      lo = 0.0;
      hi = 3.0;
      points = 7;
      break;
  }
  lo = config.get_double("sweep_min", lo);
  hi = config.get_double("sweep_max", hi);
  points = config.get_int("sweep_points", points);
  if (points < 1) throw InputError("sweep_points must be positive");
  if (hi < lo) throw InputError("sweep_max is below sweep_min");
  std::vector<double> grid;
  for (long long i = 0; i < points; ++i) {
    grid.push_back(points == 1 ? lo
                               : lo + (hi - lo) * static_cast<double>(i) /
                                          static_cast<double>(points - 1));
  }
  return grid;
}

int sweep(const Globals& g, const std::string& source_name, const std::string& config_path,
          std::ostream& out) {
  const ErrorSource source = error_source_from_string(source_name);
  const Config config = Config::load(config_path);
  SweepOptions options;
  options.base = source_params_from_config(config);
  options.calibrations = calibrations_from_config(config);
  options.distribution =
      distribution_from_string(config.get_string("plate_error_distribution", "uniform"));
  options.trials = resolve_trials(g, &config, options.trials);
  options.seed = resolve_seed(g, &config);
  const std::vector<double> grid = sweep_grid(source, config);
  const auto points = sweep_error_source(source, grid, options);

  Report rep;
  rep.doc = {{"command", "sweep"},
             {"source", source_name},
             {"input", config_path},
             {"seed", options.seed},
             {"trials", options.trials},
             {"config", config_echo(config)}};
  json rows = json::array();
  rep.csv = "parameter,fidelity,concurrence,tsirelson_gap,std_err\n";
  rep.text = fmt::format("sweep: {}\nconfig: {}\nseed: {}\n", source_name, config_path,
                         options.seed);
  rep.text += fmt::format("{:>12} {:>10} {:>12} {:>14} {:>10}\n", "parameter", "fidelity",
                          "concurrence", "2√2 − |S|", "std_err");
  for (const auto& p : points) {
    rows.push_back({{"parameter", p.parameter},
                    {"fidelity", p.fidelity},
                    {"concurrence", p.concurrence},
                    {"tsirelson_gap", p.tsirelson_gap},
                    {"std_err", p.std_err}});
    rep.csv += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.parameter, p.fidelity,
                           p.concurrence, p.tsirelson_gap, p.std_err);
    rep.text += fmt::format("{:>12.6g} {:>10.6f} {:>12.6f} {:>14} {:>10}\n", p.parameter,
                            p.fidelity, p.concurrence, sci(p.tsirelson_gap, 3), sci(p.std_err, 2));
  }
  rep.doc["points"] = rows;
  emit(g, rep, out);

  if (!g.out_dir.empty()) {
    write_file(out_path(g, "sweep_" + source_name + ".csv"), csv_echo(rep.doc) + rep.csv);
    write_file(out_path(g, "sweep_" + source_name + ".json"), rep.doc.dump(2) + "\n");
  }
  return kExitOk;
}

int budget(const Globals& g, const std::string& config_path, std::ostream& out) {
  const Config config = Config::load(config_path);
  BudgetInputs inputs = budget_inputs_from_config(config);
  inputs.trials = resolve_trials(g, &config, inputs.trials);
  inputs.seed = resolve_seed(g, &config);
  const ErrorBudget b = error_budget(inputs);

  Report rep;
  rep.doc = {{"command", "budget"},
             {"input", config_path},
             {"seed", inputs.seed},
             {"trials", inputs.trials},
             {"config", config_echo(config)},
             {"total", b.total}};
  json rows = json::array();
  rep.csv = "error_source,parameter,delta_s,std_err\n";
  rep.text = fmt::format("config: {}\nseed: {}\ntrials: {}\n", config_path, inputs.seed,
                         inputs.trials);
  rep.text += fmt::format("{:<20} {:>12} {:>12} {:>10}\n", "error source", "parameter",
                          "ΔS", "std_err");
  for (const auto& e : b.entries) {
    rows.push_back({{"error_source", e.source},
                    {"parameter", e.parameter},
                    {"delta_s", e.delta_s},
                    {"std_err", e.std_err}});
    rep.csv += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", e.source, e.parameter, e.delta_s,
                           e.std_err);
    rep.text += fmt::format("{:<20} {:>12.6g} {:>12} {:>10}\n", e.source, e.parameter,
                            sci(e.delta_s, 2), sci(e.std_err, 1));
  }
  rep.csv += fmt::format("total,,{:.17g},\n", b.total);
  rep.text += fmt::format("{:<20} {:>12} {:>12}\n", "total", "", sci(b.total, 2));
  rep.doc["entries"] = rows;
  emit(g, rep, out);

  if (!g.out_dir.empty()) {
    write_file(out_path(g, "budget.csv"), csv_echo(rep.doc) + rep.csv);
  }
  return kExitOk;
}

int fit_waveplate_cmd(const Globals& g, const std::string& file, double hint_deg,
                      std::ostream& out) {
  const auto samples = parse_stokes_samples(fs::path(file));
  WaveplateFitOptions options;
  options.zero_point_hint = hint_deg * kDeg;
  const WaveplateFit fit = fit_waveplate(samples, options);
  const PlateCalibration& c = fit.calibration;

  Report rep;
  rep.doc = {{"command", "fit-waveplate"},
             {"input", file},
             {"samples", samples.size()},
             {"zero_point_hint_deg", hint_deg},
             {"retardance_rad", c.retardance},
             {"retardance_unc_rad", c.retardance_uncertainty},
             {"zero_point_rad", c.zero_point},
             {"zero_point_unc_rad", c.zero_point_uncertainty},
             {"residual_rms", fit.residual_rms}};
  rep.text = fmt::format("input: {} ({} samples)\n", file, samples.size());
  rep.text += fmt::format("retardance: ({:.5f} ± {:.5f})π rad = {:.3f} ± {:.3f} deg\n",
                          c.retardance / kPi, c.retardance_uncertainty / kPi,
                          c.retardance / kDeg, c.retardance_uncertainty / kDeg);
  rep.text += fmt::format("zero point: {:.6f} ± {:.6f} rad = {:.4f} ± {:.4f} deg\n", c.zero_point,
                          c.zero_point_uncertainty, c.zero_point / kDeg,
                          c.zero_point_uncertainty / kDeg);
  rep.text += fmt::format("rms residual: {}\n", sci(fit.residual_rms, 3));
  rep.csv = fmt::format("{}\nfitted,{:.17g},{:.17g},{:.17g},{:.17g}\n", kCalibrationHeader,
                        c.retardance, c.retardance_uncertainty, c.zero_point,
                        c.zero_point_uncertainty);
  emit(g, rep, out);
  return kExitOk;
}

}  // namespace

std::string sci(double value, int digits) {
  if (value == 0.0) return "0";
  if (!std::isfinite(value)) return fmt::format("{}", value);
  std::string s = fmt::format("{:.{}e}", value, std::max(0, digits - 1));
  const auto e = s.find('e');
  const std::string mantissa = s.substr(0, e);
  const int exponent = std::stoi(s.substr(e + 1));
  return fmt::format("{}e{}", mantissa, exponent);
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sagnac entanglement-source simulation and analysis toolkit", "sagnac"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  int trials = 0;
  app.add_option("--seed", seed, "Random seed (overrides the config)");
  app.add_option("--out", g.out_dir, "Directory for output artifacts");
  app.add_option("--format", g.format, "Structured report format")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);

  std::string file;
  std::string config_path;
  std::string source_name;
  double hint_deg = 0.0;

  auto* analyze = app.add_subcommand("analyze-counts", "S, dS and E_i from a count table");
  analyze->add_option("file", file, "Count table CSV")->required();
  auto* simulate = app.add_subcommand("simulate-chsh", "Simulate a repeated CHSH campaign");
  simulate->add_option("config", config_path, "Config file")->required();
  auto* tomo = app.add_subcommand("tomography", "Linear, MLE and Monte-Carlo tomography");
  tomo->add_option("input", file, "Tomography counts CSV or config file")->required();
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one error source");
  sweep_cmd->add_option("source", source_name,
                        "balance | crystal_offset | multipair | plate_setting | plate_calibration")
      ->required();
  sweep_cmd->add_option("config", config_path, "Config file")->required();
  auto* budget_cmd = app.add_subcommand("budget", "Error budget of the reference setup");
  budget_cmd->add_option("config", config_path, "Config file")->required();
  auto* fit = app.add_subcommand("fit-waveplate", "Fit retardance and zero point to Stokes data");
  fit->add_option("file", file, "Stokes samples CSV")->required();
  fit->add_option("--hint-deg", hint_deg, "Zero point used to pick the axis labelling");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (app.count("--seed") > 0) g.seed = seed;
  if (app.count("--trials") > 0) g.trials = trials;

  try {
    if (analyze->parsed()) return analyze_counts(g, file, out);
    if (simulate->parsed()) return simulate_chsh(g, config_path, out);
    if (tomo->parsed()) return tomography(g, file, out);
    if (sweep_cmd->parsed()) return sweep(g, source_name, config_path, out);
    if (budget_cmd->parsed()) return budget(g, config_path, out);
    if (fit->parsed()) return fit_waveplate_cmd(g, file, hint_deg, out);
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConvergence;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace sagnac::cli
