#pragma once
// Minimal data-parallel helper. Work is split into contiguous index ranges,
// one per thread; callers must only write disjoint outputs per range, which
// keeps results independent of the thread count.

#include <cstddef>
#include <functional>

namespace veritas {

// Global cap on worker threads; 0 restores the hardware default.
void set_thread_cap(int n);
int effective_threads();

// Invokes fn(begin, end) over a partition of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace veritas
