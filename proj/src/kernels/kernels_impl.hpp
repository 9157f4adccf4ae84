#pragma once

#include "mafl/kernels.hpp"

namespace mafl::kernels {

namespace scalar {
const KernelTable& table();
}

#if defined(MAFL_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif

#if defined(MAFL_HAVE_NEON)
namespace neon {
const KernelTable& table();
}
#endif

}  // namespace mafl::kernels
