// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/runtime.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sponet
{

void configure_allocator()
{
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace sponet
