#pragma once

#include <cstddef>
#include <functional>

namespace dataens {

/// Caps the number of worker threads used by parallel loops (0 = hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks; callers
/// write results into per-index slots and reduce sequentially afterwards, so
/// results never depend on the number of threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace dataens
