#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cpgan::util {

/// Keeps large buffers on the heap instead of fresh mmap regions. A training
/// step allocates and frees many multi-megabyte tape buffers; with glibc's
/// defaults each one is a new mapping and page-faults on first touch, which
/// roughly doubles step time. No-op on other C libraries.
inline void retain_large_allocations() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace cpgan::util
