#pragma once

#include <cstddef>
#include <cstring>

#include "mvee/tree_diff.hpp"

namespace mvee::detail {

/// Applies one edit in place; `index` is reported in errors.
void apply_edit(Tree& tree, const Edit& edit, std::size_t index);

struct DigestHash {
  std::size_t operator()(const Digest128& d) const {
    std::size_t h;
    std::memcpy(&h, d.data(), sizeof h);
    return h;
  }
};

}  // namespace mvee::detail
