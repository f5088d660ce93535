#pragma once

#include <cstddef>
#include <cstdint>

// B1: selection that always writes and advances the cursor by the predicate.
static inline __attribute__((always_inline)) std::size_t run_b1(const std::int32_t* in, std::size_t n,
                                                                std::int32_t threshold, std::int32_t* out) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[k] = in[i];
    k += static_cast<std::size_t>(in[i] < threshold);
  }
  return k;
}
