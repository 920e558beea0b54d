#include <random>

#include <benchmark/benchmark.h>

#include "sagnac/chsh.hpp"
#include "sagnac/expsim.hpp"
#include "sagnac/source.hpp"
#include "sagnac/tomography.hpp"

using namespace sagnac;

namespace {

TomoCounts noisy_counts(double per_setting, std::uint64_t seed) {
  SourceParams p;
  p.balance = 1.03;
  p.crystal_offset_mm = 1.0;
  const TomoSettings s = standard_tomo_settings();
  TomoCounts counts = expected_tomo_counts(combined_source_state(p), s, per_setting);
  std::mt19937_64 rng(seed);
  for (double& n : counts.counts) n = static_cast<double>(std::poisson_distribution<long long>(n)(rng));
  return counts;
}

void BM_MleReconstruct(benchmark::State& state) {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts counts = noisy_counts(static_cast<double>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(mle_reconstruct(counts, s));
}
BENCHMARK(BM_MleReconstruct)->Arg(100)->Arg(10000)->Arg(1000000);

void BM_LinearInversion(benchmark::State& state) {
  const TomoSettings s = standard_tomo_settings();
  const TomoCounts counts = noisy_counts(1e4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(linear_inversion(counts, s));
}
BENCHMARK(BM_LinearInversion);

void BM_DirectionOverlap(benchmark::State& state) {
  const CrystalGeometry g;
  const double step = state.range(0) == 0 ? kDefaultTimeStep : 0.5 * kDefaultTimeStep;
  for (auto _ : state) benchmark::DoNotOptimize(direction_overlap(1.0, CrystalAxis::Ordinary, g, step));
}
BENCHMARK(BM_DirectionOverlap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SFromCountGrid(benchmark::State& state) {
  ExperimentPlan plan;
  plan.state = DensityMatrix::from_pure(make_bell_psi_minus());
  const CountGrid grid = simulate_counts(plan);
  for (auto _ : state) benchmark::DoNotOptimize(s_from_count_grid(grid));
}
BENCHMARK(BM_SFromCountGrid);

void BM_Campaign(benchmark::State& state) {
  ExperimentPlan plan;
  SourceParams p;
  p.balance = 1.03;
  p.crystal_offset_mm = 1.0;
  plan.state = p;
  for (auto _ : state) benchmark::DoNotOptimize(run_chsh_campaign(plan));
}
BENCHMARK(BM_Campaign)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
