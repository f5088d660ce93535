#include "digest.hpp"

#include <mutex>
#include <stdexcept>

namespace mvee::detail {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialization failed");
  });
}

}  // namespace mvee::detail
