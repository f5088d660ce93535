#include <benchmark/benchmark.h>

#include "asm_gen.hpp"
#include "fixtures.hpp"
#include "mvee/region.hpp"

namespace tst = mvee::testing;

namespace {

std::string program_text(std::size_t instructions) {
  std::mt19937 rng(static_cast<unsigned>(instructions));
  return tst::sized_program(rng, instructions).render();
}

void BM_ParseAsm(benchmark::State& state) {
  const auto text = program_text(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mvee::parse_asm_file(text, "b"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ParseAsm)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oN);

void BM_ExtractRegion(benchmark::State& state) {
  const auto file = mvee::parse_asm_file(program_text(static_cast<std::size_t>(state.range(0))), "b");
  for (auto _ : state) benchmark::DoNotOptimize(mvee::extract_region(file, "G"));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExtractRegion)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oN);

void BM_ExtractDemoSections(benchmark::State& state) {
  const auto file = mvee::parse_asm_file(tst::read_text(tst::demo_dir() / "fixtures" / "bench.s"), "b");
  for (auto _ : state) {
    for (const auto* id : {"M", "B0", "B1"}) benchmark::DoNotOptimize(mvee::extract_region(file, id));
  }
}
BENCHMARK(BM_ExtractDemoSections);

}  // namespace
