#include <benchmark/benchmark.h>

#include "benchdelta/glmm.hpp"
#include "benchdelta/synthlab.hpp"

using namespace benchdelta;

namespace {

glmm::DesignMatrix paper_cell(int templates) {
  synthlab::SimParams p;
  p.n_templates = templates;
  p.seed = 1;
  return glmm::build_design(synthlab::simulate_dataset(p).dataset, glmm::ModelSpec::glmm1());
}

void BM_Pirls(benchmark::State& state) {
  const auto dm = paper_cell(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(glmm::pirls_solve(dm, 1.0));
  state.SetItemsProcessed(state.iterations() * dm.rows());
}
BENCHMARK(BM_Pirls)->Arg(20)->Arg(100)->Arg(400);

void BM_FitGlmm(benchmark::State& state) {
  const auto dm = paper_cell(static_cast<int>(state.range(0)));
  glmm::FitOptions opts;
  opts.optimizer = static_cast<glmm::OuterOptimizer>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(glmm::fit_glmm(dm, glmm::ModelSpec::glmm1(), opts));
}
BENCHMARK(BM_FitGlmm)->Args({100, 0})->Args({100, 1})->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  synthlab::SimParams p;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthlab::simulate_dataset(p));
    ++p.seed;
  }
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMicrosecond);

}  // namespace
