#include <benchmark/benchmark.h>

#include <string>

#include "benchdelta/numload.hpp"

using namespace benchdelta;

namespace {

void BM_ExtractIntegers(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < state.range(0); ++i) {
    text += "Liam hires a luxury car from 3 PM to 9 PM. The first paid hour is $1,300 and 0.5 of the rest. ";
  }
  for (auto _ : state) benchmark::DoNotOptimize(extract_integers(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ExtractIntegers)->Arg(1)->Arg(64);

void BM_Gamma(benchmark::State& state) {
  const std::string q = "A bakery sells 250 muffins a day at $3 each for 14 days.";
  for (auto _ : state) benchmark::DoNotOptimize(gamma_of(q));
}
BENCHMARK(BM_Gamma);

}  // namespace
