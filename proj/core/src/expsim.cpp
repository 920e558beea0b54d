#include "sagnac/expsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "parallel.hpp"
#include "sagnac/errors.hpp"

namespace sagnac {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// Stream domains so CHSH, tomography and sweep draws never share a stream.
constexpr std::uint64_t kChshStream = 0;
constexpr std::uint64_t kTomoStream = 1;
constexpr std::uint64_t kSweepStream = 2;

struct AccidentalModel {
  double reference_rate = 0.0;  ///< coincidences per setting with H/V analyzers
  double p = 0.0;
  double eta_a = 1.0;
  double eta_b = 1.0;

  double counts(const Projector1Q& ma, const Projector1Q& mb) const {
    if (p == 0.0) return 0.0;
    return reference_rate * accidental_ratio(ma, mb, p, eta_a, eta_b);
  }
};

AccidentalModel accidental_model(const ExperimentPlan& plan, const DensityMatrix& rho) {
  AccidentalModel model;
  if (const auto* params = std::get_if<SourceParams>(&plan.state)) {
    model.p = params->multipair_ratio;
    model.eta_a = params->efficiency_a;
    model.eta_b = params->efficiency_b;
  }
  model.reference_rate = plan.pair_rate * plan.integration_time_s *
                         born_probability(rho, linear_projector(0.0),
                                          linear_projector(0.5 * kPi));
  return model;
}

// Linear-inversion outputs that happen to be positive semidefinite are
// re-tagged so the well-conditioned concurrence route applies.
DensityMatrix physical_if_possible(const DensityMatrix& rho) {
  if (rho.min_eigenvalue() >= kEigenvalueFloor) return DensityMatrix(rho.matrix());
  return rho;
}

struct StateMetrics {
  double fidelity = 1.0;
  double concurrence = 1.0;
  double gap = 0.0;
};

StateMetrics metrics_of(const DensityMatrix& rho) {
  return {fidelity_to_pure(rho, make_bell_psi_minus()), concurrence(rho),
          kTsirelson - std::abs(s_of_state(rho, ChshAngles::canonical()))};
}

double gap_of_grid(const Eigen::Matrix4d& counts) {
  CountGrid grid;
  grid.counts = counts;
  return s_from_count_grid(grid).tsirelson_gap();
}

// Multi-pair accidentals on Psi- with linear analyzers; tomography by linear
// inversion of the expected counts.
StateMetrics multipair_metrics(double p, const SourceParams& base) {
  SourceParams params;
  params.multipair_ratio = p;
  params.efficiency_a = base.efficiency_a;
  params.efficiency_b = base.efficiency_b;
  params.coincidence_window_ps = base.coincidence_window_ps;
  params.geometry = base.geometry;
  ExperimentPlan plan;
  plan.state = params;
  plan.pair_rate = 1.0;
  plan.integration_time_s = 1.0;
  StateMetrics out;
  out.gap = gap_of_grid(expected_chsh_counts(plan).counts);
  const DensityMatrix rho =
      physical_if_possible(linear_inversion(expected_tomo_counts(plan, standard_tomo_settings()),
                                            standard_tomo_settings()));
  out.fidelity = fidelity_to_pure(rho, make_bell_psi_minus());
  out.concurrence = concurrence(rho);
  return out;
}

// Nominal plate settings of one analyzer for the CHSH directions and the
// tomography basis (H, V, D, R), solved with the nominal calibrations.
struct AnalyzerPlan {
  std::array<PlateSetting, 4> chsh;
  std::array<PlateSetting, 4> tomo;
};

AnalyzerPlan analyzer_plan(double primary, double secondary, const PlateCalibration& hwp,
                           const PlateCalibration& qwp) {
  AnalyzerPlan out;
  const std::array<double, 4> dirs{primary, primary + 0.5 * kPi, secondary,
                                   secondary + 0.5 * kPi};
  for (std::size_t k = 0; k < 4; ++k) {
    out.chsh[k] = plates_for_linear_projection(dirs[k], hwp, qwp).setting;
  }
  // H, V, D by the linear solver, R by the general one.
  const std::array<double, 3> linear{0.0, 0.5 * kPi, 0.25 * kPi};
  for (std::size_t k = 0; k < 3; ++k) {
    out.tomo[k] = plates_for_linear_projection(linear[k], hwp, qwp).setting;
  }
  const double r = 1.0 / std::sqrt(2.0);
  out.tomo[3] = plates_for_projection(Ket2(r, Complex(0.0, r)), hwp, qwp).setting;
  return out;
}

// Tomography settings as the nominal plates realize them, so that inversion
// with zero perturbation reproduces the true state exactly.
TomoSettings nominal_tomo_settings(const AnalyzerPlan& a, const AnalyzerPlan& b) {
  static const std::array<const char*, 4> labels{"H", "V", "D", "R"};
  std::vector<TomoSetting> list;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      list.push_back({labels[i], labels[j], projector_from_plates(a.tomo[i]),
                      projector_from_plates(b.tomo[j])});
    }
  }
  return make_tomo_settings(std::move(list));
}

// Realized analyzers for one trial: a projector per CHSH cell side and per
// tomography cell side.
struct TrialAnalyzers {
  std::vector<std::pair<Projector1Q, Projector1Q>> chsh;
  std::vector<std::pair<Projector1Q, Projector1Q>> tomo;
};

StateMetrics evaluate_trial(const DensityMatrix& truth, const TrialAnalyzers& analyzers,
                            const TomoSettings& assumed) {
  Eigen::Matrix4d grid;
  for (int cell = 0; cell < 16; ++cell) {
    const auto& pair = analyzers.chsh[static_cast<std::size_t>(cell)];
    grid(cell / 4, cell % 4) = born_probability(truth, pair.first, pair.second);
  }
  TomoCounts tomo;
  tomo.flux = 1.0;
  for (std::size_t cell = 0; cell < 16; ++cell) {
    tomo.counts[cell] = born_probability(truth, analyzers.tomo[cell].first, analyzers.tomo[cell].second);
  }
  const DensityMatrix rho = physical_if_possible(linear_inversion(tomo, assumed));
  return {fidelity_to_pure(rho, make_bell_psi_minus()), concurrence(rho), gap_of_grid(grid)};
}

// Each trial evaluates its draws and their negation (antithetic pair). The
// error distributions are symmetric, so the mean is unchanged while the
// first-order fluctuations cancel.
template <typename TrialFn>
SweepPoint monte_carlo_point(double parameter, int trials, std::uint64_t seed,
                             std::uint64_t point, TrialFn&& trial_fn) {
  if (trials < 1) throw InputError("plate sweeps need at least one trial");
  std::vector<StateMetrics> rows(static_cast<std::size_t>(trials));
  detail::parallel_for(rows.size(), [&](std::size_t t) {
    const std::initializer_list<std::uint64_t> keys{kSweepStream, point,
                                                    static_cast<std::uint64_t>(t)};
    auto rng = detail::make_stream(seed, keys);
    const StateMetrics plus = trial_fn(rng, 1.0);
    rng = detail::make_stream(seed, keys);
    const StateMetrics minus = trial_fn(rng, -1.0);
    rows[t] = {0.5 * (plus.fidelity + minus.fidelity), 0.5 * (plus.concurrence + minus.concurrence),
               0.5 * (plus.gap + minus.gap)};
  });
  std::vector<double> gaps;
  gaps.reserve(rows.size());
  SweepPoint out;
  out.parameter = parameter;
  out.fidelity = 0.0;
  out.concurrence = 0.0;
  for (const auto& r : rows) {
    out.fidelity += r.fidelity;
    out.concurrence += r.concurrence;
    gaps.push_back(r.gap);
  }
  out.fidelity /= static_cast<double>(trials);
  out.concurrence /= static_cast<double>(trials);
  const MetricSummary summary = summarize(gaps);
  out.tsirelson_gap = summary.mean;
  out.std_err = summary.stddev / std::sqrt(static_cast<double>(trials));
  return out;
}

SweepPoint plate_setting_point(double error_deg, std::size_t point, const SweepOptions& options) {
  const auto hwp = PlateCalibration::ideal_half_wave();
  const auto qwp = PlateCalibration::ideal_quarter_wave();
  const AnalyzerPlan a = analyzer_plan(0.0, 0.25 * kPi, hwp, qwp);
  const AnalyzerPlan b = analyzer_plan(0.125 * kPi, 0.375 * kPi, hwp, qwp);
  const TomoSettings assumed = nominal_tomo_settings(a, b);
  const DensityMatrix truth = DensityMatrix::from_pure(make_bell_psi_minus());
  const double eps = error_deg * kDeg;
  const PlateErrorDistribution distribution = options.distribution;

  auto draw = [eps, distribution](std::mt19937_64& rng) {
    if (eps == 0.0) return 0.0;
    if (distribution == PlateErrorDistribution::Uniform) {
      return std::uniform_real_distribution<double>(-eps, eps)(rng);
    }
    return std::normal_distribution<double>(0.0, eps)(rng);
  };
  return monte_carlo_point(error_deg, options.trials, options.seed, point,
                           [&](std::mt19937_64& rng, double sign) {
    auto jitter = [&](PlateSetting s) {
      s.hwp_angle += sign * draw(rng);
      s.qwp_angle += sign * draw(rng);
      return projector_from_plates(s);
    };
    // Every measurement cell re-positions all four plates independently.
    TrialAnalyzers analyzers;
    for (std::size_t cell = 0; cell < 16; ++cell) {
      const Projector1Q pa = jitter(a.chsh[cell / 4]);
      const Projector1Q pb = jitter(b.chsh[cell % 4]);
      analyzers.chsh.emplace_back(pa, pb);
    }
    for (std::size_t cell = 0; cell < 16; ++cell) {
      const Projector1Q pa = jitter(a.tomo[cell / 4]);
      const Projector1Q pb = jitter(b.tomo[cell % 4]);
      analyzers.tomo.emplace_back(pa, pb);
    }
    return evaluate_trial(truth, analyzers, assumed);
  });
}

SweepPoint plate_calibration_point(double scale, std::size_t point, const SweepOptions& options) {
  const AnalyzerCalibrations& cal = options.calibrations;
  const AnalyzerPlan a = analyzer_plan(0.0, 0.25 * kPi, cal.a_hwp, cal.a_qwp);
  const AnalyzerPlan b = analyzer_plan(0.125 * kPi, 0.375 * kPi, cal.b_hwp, cal.b_qwp);
  const TomoSettings assumed = nominal_tomo_settings(a, b);
  const DensityMatrix truth = DensityMatrix::from_pure(make_bell_psi_minus());

  auto perturb = [scale](const PlateCalibration& nominal, std::mt19937_64& rng, double sign) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    PlateCalibration out = nominal;
    out.retardance += sign * scale * nominal.retardance_uncertainty * gauss(rng);
    out.zero_point += sign * scale * nominal.zero_point_uncertainty * gauss(rng);
    return out;
  };
  auto realize = [](PlateSetting s, const PlateCalibration& hwp, const PlateCalibration& qwp) {
    s.hwp_cal = hwp;
    s.qwp_cal = qwp;
    return projector_from_plates(s);
  };

  return monte_carlo_point(scale, options.trials, options.seed, point, [&](std::mt19937_64& rng,
                                                                            double sign) {
    // The true plates differ from their calibration by one draw per trial.
    const PlateCalibration ah = perturb(cal.a_hwp, rng, sign);
    const PlateCalibration aq = perturb(cal.a_qwp, rng, sign);
    const PlateCalibration bh = perturb(cal.b_hwp, rng, sign);
    const PlateCalibration bq = perturb(cal.b_qwp, rng, sign);
    TrialAnalyzers analyzers;
    for (std::size_t cell = 0; cell < 16; ++cell) {
      analyzers.chsh.emplace_back(realize(a.chsh[cell / 4], ah, aq),
                                  realize(b.chsh[cell % 4], bh, bq));
      analyzers.tomo.emplace_back(realize(a.tomo[cell / 4], ah, aq),
                                  realize(b.tomo[cell % 4], bh, bq));
    }
    return evaluate_trial(truth, analyzers, assumed);
  });
}

}  // namespace

std::string to_string(ErrorSource source) {
  switch (source) {
    case ErrorSource::Balance:
      return "balance";
    case ErrorSource::CrystalOffset:
      return "crystal_offset";
    case ErrorSource::Multipair:
      return "multipair";
    case ErrorSource::PlateSetting:
      return "plate_setting";
    case ErrorSource::PlateCalibration:
      return "plate_calibration";
  }
  return "unknown";
}

ErrorSource error_source_from_string(const std::string& name) {
  for (ErrorSource s : {ErrorSource::Balance, ErrorSource::CrystalOffset, ErrorSource::Multipair,
                        ErrorSource::PlateSetting, ErrorSource::PlateCalibration}) {
    if (to_string(s) == name) return s;
  }
  throw InputError("unknown error source '" + name +
                   "' (expected balance, crystal_offset, multipair, plate_setting or "
                   "plate_calibration)");
}

std::string to_string(PlateErrorDistribution distribution) {
  return distribution == PlateErrorDistribution::Uniform ? "uniform" : "gaussian";
}

PlateErrorDistribution distribution_from_string(const std::string& name) {
  if (name == "uniform") return PlateErrorDistribution::Uniform;
  if (name == "gaussian") return PlateErrorDistribution::Gaussian;
  throw InputError("unknown plate error distribution '" + name +
                   "' (expected uniform or gaussian)");
}

AnalyzerCalibrations AnalyzerCalibrations::reference() {
  AnalyzerCalibrations out;
  out.a_hwp = {1.0122 * kPi, 35.924 * kDeg, 0.0035 * kPi, 0.00010};
  out.a_qwp = {1.0427 * kPi / 2.0, 34.492 * kDeg, 0.0005 * kPi / 2.0, 0.00024};
  out.b_hwp = {1.0075 * kPi, 26.012 * kDeg, 0.0030 * kPi, 0.00015};
  out.b_qwp = {0.99155 * kPi / 2.0, 109.893 * kDeg, 0.0005 * kPi / 2.0, 0.00018};
  return out;
}

void ExperimentPlan::validate() const {
  if (!(pair_rate >= 0.0) || !std::isfinite(pair_rate)) {
    throw InputError("pair rate must be non-negative");
  }
  if (!(integration_time_s >= 0.0) || !std::isfinite(integration_time_s)) {
    throw InputError("integration time must be non-negative");
  }
  if (repetitions < 1) throw InputError("repetitions must be at least 1");
  if (!efficiencies.allFinite() || (efficiencies.array() < 0.0).any()) {
    throw InputError("per-setting efficiencies must be non-negative");
  }
  if (const auto* params = std::get_if<SourceParams>(&state)) params->validate();
}

DensityMatrix ExperimentPlan::density_matrix() const {
  if (const auto* params = std::get_if<SourceParams>(&state)) {
    return combined_source_state(*params);
  }
  return std::get<DensityMatrix>(state);
}

CountGrid expected_chsh_counts(const ExperimentPlan& plan) {
  plan.validate();
  const DensityMatrix rho = plan.density_matrix();
  const AccidentalModel accidentals = accidental_model(plan, rho);
  CountGrid grid;
  grid.a_settings = CountGrid::settings_for(plan.angles.alpha[0], plan.angles.alpha[1]);
  grid.b_settings = CountGrid::settings_for(plan.angles.beta[0], plan.angles.beta[2]);
  grid.integration_time_s = plan.integration_time_s;
  const double flux = plan.pair_rate * plan.integration_time_s;
  for (std::size_t i = 0; i < 4; ++i) {
    const Projector1Q ma = projector_from_plates(grid.a_settings[i]);
    for (std::size_t j = 0; j < 4; ++j) {
      const Projector1Q mb = projector_from_plates(grid.b_settings[j]);
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(j);
      grid.counts(r, c) = flux * born_probability(rho, ma, mb) * plan.efficiencies(r, c) +
                          accidentals.counts(ma, mb);
    }
  }
  return grid;
}

TomoCounts expected_tomo_counts(const ExperimentPlan& plan, const TomoSettings& settings) {
  plan.validate();
  const DensityMatrix rho = plan.density_matrix();
  const AccidentalModel accidentals = accidental_model(plan, rho);
  TomoCounts out = expected_tomo_counts(rho, settings, plan.pair_rate * plan.integration_time_s);
  for (std::size_t i = 0; i < 16; ++i) {
    out.counts[i] += accidentals.counts(settings.settings[i].a, settings.settings[i].b);
  }
  return out;
}

CountGrid simulate_counts(const ExperimentPlan& plan, int repetition) {
  CountGrid grid = expected_chsh_counts(plan);
  for (int cell = 0; cell < 16; ++cell) {
    auto rng = detail::make_stream(plan.seed, {kChshStream, static_cast<std::uint64_t>(repetition),
                                               static_cast<std::uint64_t>(cell)});
    double& n = grid.counts(cell / 4, cell % 4);
    n = detail::poisson(rng, n);
  }
  return grid;
}

TomoCounts simulate_tomo_counts(const ExperimentPlan& plan, const TomoSettings& settings,
                                int repetition) {
  TomoCounts counts = expected_tomo_counts(plan, settings);
  for (std::size_t cell = 0; cell < 16; ++cell) {
    auto rng = detail::make_stream(plan.seed, {kTomoStream, static_cast<std::uint64_t>(repetition),
                                               static_cast<std::uint64_t>(cell)});
    counts.counts[cell] = detail::poisson(rng, counts.counts[cell]);
  }
  return counts;
}

CampaignResult run_chsh_campaign(const ExperimentPlan& plan) {
  plan.validate();
  const CountGrid expected = expected_chsh_counts(plan);
  const auto reps = static_cast<std::size_t>(plan.repetitions);
  CampaignResult out;
  out.counts.assign(reps, expected);
  detail::parallel_for(reps, [&](std::size_t r) {
    CountGrid& grid = out.counts[r];
    for (int cell = 0; cell < 16; ++cell) {
      auto rng = detail::make_stream(plan.seed, {kChshStream, static_cast<std::uint64_t>(r),
                                                 static_cast<std::uint64_t>(cell)});
      double& n = grid.counts(cell / 4, cell % 4);
      n = detail::poisson(rng, expected.counts(cell / 4, cell % 4));
    }
  });
  out.pooled_counts = expected;
  out.pooled_counts.counts.setZero();
  out.pooled_counts.integration_time_s = plan.integration_time_s * plan.repetitions;
  int above = 0;
  for (const auto& grid : out.counts) {
    out.repetitions.push_back(s_from_count_grid(grid));
    out.pooled_counts.counts += grid.counts;
    if (out.repetitions.back().magnitude() > kTsirelson) ++above;
  }
  out.pooled = s_from_count_grid(out.pooled_counts);
  out.fraction_above_bound = static_cast<double>(above) / static_cast<double>(reps);
  return out;
}

std::vector<SweepPoint> sweep_error_source(ErrorSource source, std::span<const double> values,
                                           const SweepOptions& options) {
  std::vector<SweepPoint> out;
  out.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    switch (source) {
      case ErrorSource::Balance: {
        const StateMetrics m =
            metrics_of(DensityMatrix::from_pure(balance_state(v, options.base.phase)));
        out.push_back({v, m.fidelity, m.concurrence, m.gap, 0.0});
        break;
      }
      case ErrorSource::CrystalOffset: {
        const StateMetrics m = metrics_of(crystal_offset_state(v, options.base.geometry));
        out.push_back({v, m.fidelity, m.concurrence, m.gap, 0.0});
        break;
      }
      case ErrorSource::Multipair: {
        if (!(v >= 0.0)) throw InputError("multipair ratio must be non-negative");
        const StateMetrics m = multipair_metrics(v, options.base);
        out.push_back({v, m.fidelity, m.concurrence, m.gap, 0.0});
        break;
      }
      case ErrorSource::PlateSetting:
        if (!(v >= 0.0)) throw InputError("plate setting error must be non-negative");
        out.push_back(plate_setting_point(v, k, options));
        break;
      case ErrorSource::PlateCalibration:
        if (!(v >= 0.0)) throw InputError("calibration uncertainty scale must be non-negative");
        out.push_back(plate_calibration_point(v, k, options));
        break;
    }
  }
  return out;
}

ErrorBudget error_budget(const BudgetInputs& inputs) {
  inputs.params.validate();
  const SourceParams& p = inputs.params;
  SweepOptions options;
  options.base = p;
  options.calibrations = inputs.calibrations;
  options.distribution = inputs.distribution;
  options.trials = inputs.trials;
  options.seed = inputs.seed;

  ErrorBudget budget;
  const double z = p.crystal_offset_mm;
  budget.entries.push_back(
      {"crystal_offset", z, sweep_error_source(ErrorSource::CrystalOffset, {&z, 1}, options)[0].tsirelson_gap, 0.0});
  const double balance = p.balance;
  budget.entries.push_back(
      {"balance", balance, sweep_error_source(ErrorSource::Balance, {&balance, 1}, options)[0].tsirelson_gap, 0.0});
  const double one = 1.0;
  const SweepPoint cal = sweep_error_source(ErrorSource::PlateCalibration, {&one, 1}, options)[0];
  budget.entries.push_back({"plate_calibration", one, cal.tsirelson_gap, cal.std_err});
  const double eps = inputs.plate_setting_error_deg;
  const SweepPoint setting = sweep_error_source(ErrorSource::PlateSetting, {&eps, 1}, options)[0];
  budget.entries.push_back({"plate_setting", eps, setting.tsirelson_gap, setting.std_err});
  const double ratio = p.multipair_ratio;
  budget.entries.push_back(
      {"multipair", ratio, sweep_error_source(ErrorSource::Multipair, {&ratio, 1}, options)[0].tsirelson_gap, 0.0});

  std::stable_sort(budget.entries.begin(), budget.entries.end(),
                   [](const BudgetEntry& a, const BudgetEntry& b) { return a.delta_s > b.delta_s; });
  for (const auto& e : budget.entries) budget.total += e.delta_s;
  return budget;
}

}  // namespace sagnac
