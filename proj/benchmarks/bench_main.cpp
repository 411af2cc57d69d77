#include "mfgc/certify.hpp"
#include "mfgc/equilibrium.hpp"

#include <benchmark/benchmark.h>

using namespace mfgc;

namespace {

Vec vec1(double v) { return Vec::Constant(1, v); }

ModelSpec cournot() {
  return ModelSpec::cournot(1, -0.5, 1.0)
      .with_terminal(TerminalCost::quadratic(Mat::Identity(1, 1), Vec::Zero(1)));
}

void BM_CournotDpH(benchmark::State& state) {
  const auto model = cournot();
  double p = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpH(model, vec1(0.0), vec1(p), vec1(0.7)));
    p = p > 5.0 ? 0.5 : p + 0.01;
  }
}
BENCHMARK(BM_CournotDpH);

void BM_Shooting(benchmark::State& state) {
  const auto model = ModelSpec::quadratic_xv(1);
  const TimeGrid grid(1.0, static_cast<int>(state.range(0)));
  const auto Q = ControlPath::constant(grid, vec1(0.5));
  for (auto _ : state) benchmark::DoNotOptimize(solve_el_shooting(model, vec1(1.0), Q));
}
BENCHMARK(BM_Shooting)->Arg(100)->Arg(400);

void BM_ErrorMap(benchmark::State& state) {
  const auto model = cournot();
  const auto m0 = ParticleEnsemble::gaussian(vec1(2.0), Mat::Constant(1, 1, 0.25),
                                             static_cast<int>(state.range(0)), 1);
  const TimeGrid grid(2.0, 100);
  const auto Q = ControlPath::constant(grid, vec1(0.4));
  for (auto _ : state) benchmark::DoNotOptimize(error_map(model, m0, Q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ErrorMap)->Arg(64)->Arg(512);

void BM_CheckA1(benchmark::State& state) {
  const auto model = cournot();
  SampleSpec spec;
  spec.box = default_box(model);
  for (auto _ : state) benchmark::DoNotOptimize(check_A1(model, spec));
}
BENCHMARK(BM_CheckA1);

}  // namespace

BENCHMARK_MAIN();
