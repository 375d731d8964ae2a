#include <benchmark/benchmark.h>

#include "spire/disasm.hpp"
#include "spire/x86.hpp"

namespace {

// A mix of register, memory, immediate and branch forms.
const spire::Bytes kMix{0x55, 0x48, 0x89, 0xe5, 0x48, 0x83, 0xec, 0x10, 0x89, 0x7d, 0xfc, 0x8b, 0x45, 0xfc,
                        0x48, 0x8d, 0x04, 0x8a, 0x85, 0xc0, 0x74, 0x05, 0xe8, 0x00, 0x00, 0x00, 0x00, 0x48,
                        0xb8, 0xef, 0xcd, 0xab, 0x89, 0x67, 0x45, 0x23, 0x01, 0xc9, 0xc3};

void BM_DecodeInstruction(benchmark::State& state) {
  for (auto _ : state) {
    std::size_t offset = 0;
    while (offset < kMix.size()) {
      auto insn = spire::x86::decode_instruction(spire::ByteView(kMix).subspan(offset), 0x401000 + offset);
      offset += insn.length;
      benchmark::DoNotOptimize(insn);
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * kMix.size()));
}
BENCHMARK(BM_DecodeInstruction);

void BM_LinearSweep(benchmark::State& state) {
  spire::Bytes code;
  while (code.size() < static_cast<std::size_t>(state.range(0)))
    code.insert(code.end(), kMix.begin(), kMix.end());
  for (auto _ : state) {
    auto region = spire::linear_sweep(code, 0x401000);
    benchmark::DoNotOptimize(region);
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * code.size()));
}
BENCHMARK(BM_LinearSweep)->Range(1 << 10, 1 << 18);

}  // namespace
