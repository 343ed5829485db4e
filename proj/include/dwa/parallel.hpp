#pragma once

#include <cstddef>
#include <functional>

namespace dwa {

// Runs fn(0..n-1) on up to `threads` worker threads. Callers write to
// disjoint per-index slots, so results do not depend on the thread count;
// any reduction over the results happens serially afterwards.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace dwa
