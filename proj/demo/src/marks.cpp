#include <cstddef>

#include "mvee/marks.h"

MVEE_DEFINE_MARKS(M, std::size_t)
MVEE_DEFINE_MARKS(B0, std::size_t)
MVEE_DEFINE_MARKS(B1, std::size_t)
