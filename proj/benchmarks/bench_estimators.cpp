#include "ifeatt/ifeatt.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace ifeatt;

void BM_TwoStepFit(benchmark::State& state) {
  sim::SimConfig cfg;
  cfg.n = state.range(0);
  const PanelDataset data = sim::generate_panel(cfg, 0);
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  const StackDims dims = StackDims::compute(data.t_total(), data.t_star, data.k(), spec.k_x());
  MatrixXd zx = MatrixXd::Zero(dims.m1, dims.l1 * data.n());
  MatrixXd zy = MatrixXd::Zero(dims.m1, data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const StackedUnit u = build_stacked_unit(data, i, spec);
    zx.middleCols(i * dims.l1, dims.l1) = u.z * u.x;
    zy.col(i) = u.z * u.y;
  }
  const gmm::MomentSystem system = gmm::make_moment_system(zx, zy);
  for (auto _ : state) benchmark::DoNotOptimize(gmm::two_step_fit(system));
}
BENCHMARK(BM_TwoStepFit)->Arg(1000)->Arg(10000);

void BM_EstimateGamma1(benchmark::State& state) {
  sim::SimConfig cfg;
  cfg.n = state.range(0);
  cfg.f_extra = {2.0, 2.5};
  cfg.theta_extra = {3.0, 4.0};
  cfg.t_star = static_cast<int>(state.range(1));
  const PanelDataset data = sim::generate_panel(cfg, 0);
  const ModelSpec spec = ModelSpec::intercept_in_x(2);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_gamma1(data, spec));
}
BENCHMARK(BM_EstimateGamma1)->Args({1000, 3})->Args({1000, 5})->Args({10000, 5});

void BM_RunGrid(benchmark::State& state) {
  const auto grid = sim::table_grid(1000, 20, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_grid(grid, 1));
}
BENCHMARK(BM_RunGrid)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
