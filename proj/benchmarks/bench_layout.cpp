#include <benchmark/benchmark.h>

#include <random>

#include "spire/layout.hpp"

namespace {

using spire::layout::AbstractGraph;

AbstractGraph random_dag(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AbstractGraph g;
  for (std::size_t i = 0; i < n; ++i)
    g.add_node(i, "n" + std::to_string(i), {80, 40});
  for (std::size_t i = 1; i < n; ++i) {
    g.add_edge(rng() % i, i);
    if (rng() % 2)
      g.add_edge(rng() % i, i);
  }
  return g;
}

void BM_Sugiyama(benchmark::State& state) {
  const auto g = random_dag(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(spire::layout::layout_sugiyama(g));
}
BENCHMARK(BM_Sugiyama)->RangeMultiplier(4)->Range(8, 512);

void BM_ForceDirected(benchmark::State& state) {
  const auto g = random_dag(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(spire::layout::layout_force(g));
}
BENCHMARK(BM_ForceDirected)->RangeMultiplier(4)->Range(8, 512);

}  // namespace
