#pragma once

#include <sodium.h>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace mvee::detail {

/// Streaming BLAKE2b with a fixed output size.
template <std::size_t N>
class Blake2b {
  static_assert(N >= crypto_generichash_BYTES_MIN && N <= crypto_generichash_BYTES_MAX);

 public:
  Blake2b();

  Blake2b& update(std::string_view bytes) {
    crypto_generichash_update(&state_, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
    return *this;
  }
  template <std::size_t M>
  Blake2b& update(const std::array<std::uint8_t, M>& bytes) {
    crypto_generichash_update(&state_, bytes.data(), bytes.size());
    return *this;
  }
  // Length-prefixed, so that concatenations stay unambiguous.
  Blake2b& field(std::string_view bytes) {
    const auto n = static_cast<std::uint64_t>(bytes.size());
    crypto_generichash_update(&state_, reinterpret_cast<const unsigned char*>(&n), sizeof n);
    return update(bytes);
  }

  std::array<std::uint8_t, N> finish() {
    std::array<std::uint8_t, N> out{};
    crypto_generichash_final(&state_, out.data(), out.size());
    return out;
  }

 private:
  crypto_generichash_state state_;
};

void ensure_sodium();

template <std::size_t N>
Blake2b<N>::Blake2b() {
  ensure_sodium();
  crypto_generichash_init(&state_, nullptr, 0, N);
}

template <std::size_t N>
std::string to_hex(const std::array<std::uint8_t, N>& bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * N);
  for (auto b : bytes) {
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

}  // namespace mvee::detail
