#include <benchmark/benchmark.h>

#include "asm_gen.hpp"
#include "fixtures.hpp"
#include "mvee/equivalence.hpp"

namespace tst = mvee::testing;

namespace {

struct Pair {
  mvee::MarkedRegion a;
  mvee::MarkedRegion b;
};

Pair mutated_pair(std::size_t instructions) {
  std::mt19937 rng(static_cast<unsigned>(instructions));
  const auto p = tst::sized_program(rng, instructions);
  auto q = p;
  for (auto m : {tst::AsmMutation::ImmediateChange, tst::AsmMutation::RegisterRename, tst::AsmMutation::SwapGroups,
                 tst::AsmMutation::InsertInstruction}) {
    tst::mutate_program(q, rng, m);
  }
  return {tst::region_from_text(p.render(), p.section, "a"), tst::region_from_text(q.render(), q.section, "b")};
}

void BM_BuildTree(benchmark::State& state) {
  const auto pair = mutated_pair(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mvee::build_tree(pair.a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildTree)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oN);

void BM_Diff(benchmark::State& state) {
  const auto pair = mutated_pair(static_cast<std::size_t>(state.range(0)));
  const auto a = mvee::build_tree(pair.a);
  const auto b = mvee::build_tree(pair.b);
  for (auto _ : state) benchmark::DoNotOptimize(mvee::diff(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Diff)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

void BM_DiffIdentical(benchmark::State& state) {
  const auto pair = mutated_pair(static_cast<std::size_t>(state.range(0)));
  const auto a = mvee::build_tree(pair.a);
  for (auto _ : state) benchmark::DoNotOptimize(mvee::diff(a, a));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DiffIdentical)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oN);

void BM_CompareRegions(benchmark::State& state) {
  const auto pair = mutated_pair(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mvee::compare_regions(pair.a, pair.b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CompareRegions)->RangeMultiplier(10)->Range(100, 10000)->Complexity(benchmark::oN);

void BM_CompareCorpus(benchmark::State& state) {
  const auto corpus = tst::load_corpus();
  for (auto _ : state) {
    for (const auto& c : corpus) benchmark::DoNotOptimize(mvee::compare_regions(c.a, c.b));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus.size()));
}
BENCHMARK(BM_CompareCorpus);

}  // namespace
