#include <benchmark/benchmark.h>

#include <random>

#include "benchdelta/inference.hpp"

using namespace benchdelta;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_Holm(benchmark::State& state) {
  const auto p = uniform(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(inference::holm_bonferroni(p));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Holm)->Range(16, 1 << 16)->Complexity();

void BM_KsTwoSample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = uniform(n, 1), b = uniform(n * 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(inference::ks_two_sample(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsTwoSample)->Range(64, 1 << 14)->Complexity();

}  // namespace
