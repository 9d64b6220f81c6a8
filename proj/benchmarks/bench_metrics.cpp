#include <benchmark/benchmark.h>

#include "gosr/metrics.hpp"
#include "gosr/rng.hpp"
#include "gosr/splits.hpp"

namespace {

void BM_Auroc(benchmark::State& state) {
  gosr::Rng rng(11);
  gosr::ScoredSet set;
  const auto n = state.range(0);
  for (std::int64_t i = 0; i < n; ++i) {
    set.scores.push_back(rng.uniform());
    set.truth.push_back(i % 2 == 0 ? 1 : 0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(gosr::auroc(set));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_Auroc)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_GenerateClassSplit(benchmark::State& state) {
  std::vector<int> classes(100);
  for (int i = 0; i < 100; ++i) classes[static_cast<std::size_t>(i)] = i;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gosr::generate_class_split(classes, 60, 40, seed++));
  }
}
BENCHMARK(BM_GenerateClassSplit);

}  // namespace
