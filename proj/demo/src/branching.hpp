#pragma once

#include <cstddef>
#include <cstdint>

// B0: selection with a data-dependent branch.
static inline __attribute__((always_inline)) std::size_t run_b0(const std::int32_t* in, std::size_t n,
                                                                std::int32_t threshold, std::int32_t* out) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (in[i] < threshold) out[k++] = in[i];
  }
  return k;
}
