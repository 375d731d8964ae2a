#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "spire/analysis.hpp"
#include "spire/fixture.hpp"

namespace {

spire::Bytes fixture(const char* name) {
  std::ifstream in(std::string(SPIRE_BENCH_FIXTURES) + "/" + name + ".recipe");
  std::stringstream text;
  text << in.rdbuf();
  return spire::build_fixture(text.str()).bytes;
}

void BM_AnalyzeProgram(benchmark::State& state, const char* name) {
  const auto bytes = fixture(name);
  const auto rules = spire::CapabilityRules::defaults();
  for (auto _ : state) {
    spire::LoadedImage image{spire::ByteView(bytes)};
    benchmark::DoNotOptimize(spire::analyze_program(image, rules));
  }
}
BENCHMARK_CAPTURE(BM_AnalyzeProgram, calls, "calls");
BENCHMARK_CAPTURE(BM_AnalyzeProgram, cfg_shapes, "cfg_shapes");

}  // namespace
