// Serial vs OpenMP timings of the hot loops. Arg 0 selects the path (0 serial, 1 parallel).

#include <benchmark/benchmark.h>

#include <random>

#include "tpkmp/experiments.hpp"
#include "tpkmp/kernels.hpp"

using namespace tpkmp;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

const Scenario& scenario() {
  static const Scenario sc = generate_scenario(ScenarioKind::pick_place, 0);
  return sc;
}

const TpModel& model() {
  static const TpModel m = train(scenario().demos, scenario().train);
  return m;
}

void BM_Gram(benchmark::State& st) {
  const auto s = make_inputs(st.range(1), 1.0);
  const KernelConfig k;
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram(k, s, exec_of(st)));
}
BENCHMARK(BM_Gram)->ArgsProduct({{0, 1}, {500, 2000}})->Unit(benchmark::kMillisecond);

void BM_WeightedLogDensities(benchmark::State& st) {
  const auto& sc = scenario();
  const auto fit = fit_gmm(sc.demos, sc.train.components, 0);
  Mat pts(st.range(1), 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < pts.rows(); ++i) pts.row(i) << u(rng), u(rng), u(rng);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::weighted_log_densities(pts, fit.mixture, exec_of(st)));
}
BENCHMARK(BM_WeightedLogDensities)->ArgsProduct({{0, 1}, {20000}})->Unit(benchmark::kMillisecond);

void BM_FitGmm(benchmark::State& st) {
  const auto& sc = scenario();
  for (auto _ : st) {
    benchmark::DoNotOptimize(fit_gmm(sc.demos, sc.train.components, 0, sc.train.em, exec_of(st)));
  }
}
BENCHMARK(BM_FitGmm)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_PredictBatch(benchmark::State& st) {
  const auto q = make_inputs(st.range(1), 1.3);
  const Kmp& kmp = model().locals[0].kmp;
  for (auto _ : st) benchmark::DoNotOptimize(kmp.predict_batch(q, exec_of(st)));
}
BENCHMARK(BM_PredictBatch)->ArgsProduct({{0, 1}, {500, 2000}})->Unit(benchmark::kMillisecond);

void BM_LocalPredictions(benchmark::State& st) {
  const auto q = make_inputs(2000, 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(local_predictions(model(), q, exec_of(st)));
}
BENCHMARK(BM_LocalPredictions)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_FuseTable(benchmark::State& st) {
  const auto q = make_inputs(2000, 1.0);
  const auto table = local_predictions(model(), q);
  for (auto _ : st) benchmark::DoNotOptimize(fuse_table(model(), table, scenario().correction_frames, exec_of(st)));
}
BENCHMARK(BM_FuseTable)->Args({0})->Args({1})->Unit(benchmark::kMillisecond);

void BM_KmpRebuild(benchmark::State& st) {
  Kmp kmp = model().locals[0].kmp;
  for (auto _ : st) {
    kmp.rebuild();
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_KmpRebuild)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
