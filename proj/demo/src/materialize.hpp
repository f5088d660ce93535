#pragma once

#include <cstddef>
#include <cstdint>

// M: copies the input column into the output buffer.
static inline __attribute__((always_inline)) std::size_t run_m(const std::int32_t* in, std::size_t n,
                                                               std::int32_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i];
  return n;
}
