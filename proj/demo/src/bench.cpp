#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "branching.hpp"
#include "branchless.hpp"
#include "materialize.hpp"
#include "mvee/marks.h"

__attribute__((noinline)) std::size_t section_m(const std::int32_t* in, std::size_t n, std::int32_t* out) {
  std::size_t r;
  gen_begin_mark(M, std::size_t, n);
  r = run_m(in, n, out);
  gen_end_mark(M, std::size_t, r);
  return r;
}

__attribute__((noinline)) std::size_t section_b0(const std::int32_t* in, std::size_t n, std::int32_t threshold,
                                                 std::int32_t* out) {
  std::size_t r;
  gen_begin_mark(B0, std::size_t, n);
  r = run_b0(in, n, threshold, out);
  gen_end_mark(B0, std::size_t, r);
  return r;
}

__attribute__((noinline)) std::size_t section_b1(const std::int32_t* in, std::size_t n, std::int32_t threshold,
                                                 std::int32_t* out) {
  std::size_t r;
  gen_begin_mark(B1, std::size_t, n);
  r = run_b1(in, n, threshold, out);
  gen_end_mark(B1, std::size_t, r);
  return r;
}

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const std::chrono::duration<double, std::milli> d = std::chrono::steady_clock::now() - start;
  return d.count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const char* out_path = argc > 1 ? argv[1] : "mvee-results.json";
  constexpr std::size_t n = 1 << 18;
  constexpr int reps = 5;
  std::vector<std::int32_t> in(n);
  std::vector<std::int32_t> out(n);
  std::mt19937 rng(42);
  std::uniform_int_distribution<std::int32_t> dist(0, 99);
  for (auto& v : in) v = dist(rng);

  std::FILE* f = std::fopen(out_path, "w");
  if (f == nullptr) {
    std::perror(out_path);
    return 1;
  }
  std::fprintf(f, "[\n");
  bool first = true;
  auto emit = [&](const char* section, double selectivity, double ms) {
    std::fprintf(f, "%s  {\"section\": \"%s\", \"params\": {\"selectivity\": %.2f}, \"metric\": \"runtime\", "
                    "\"value\": %.6f, \"unit\": \"ms\"}",
                 first ? "" : ",\n", section, selectivity, ms);
    first = false;
  };
  emit("M", 1.0, time_ms([&] { section_m(in.data(), n, out.data()); }, reps));
  for (int pct : {1, 10, 25, 50, 75, 90, 100}) {
    const std::int32_t threshold = pct;
    emit("B0", pct / 100.0, time_ms([&] { section_b0(in.data(), n, threshold, out.data()); }, reps));
    emit("B1", pct / 100.0, time_ms([&] { section_b1(in.data(), n, threshold, out.data()); }, reps));
  }
  std::fprintf(f, "\n]\n");
  std::fclose(f);
  return 0;
}
