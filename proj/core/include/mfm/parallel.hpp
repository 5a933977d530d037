#pragma once

#include <cstdint>
#include <functional>

namespace mfm {

// Number of worker threads kernels may use. Resolved once per process:
// MFM_THREADS if set (clamped to >= 1), otherwise hardware concurrency.
int max_threads();

// Runs fn(begin, end) over a static partition of [0, n). Every index is
// processed by exactly one invocation and each invocation walks its range
// in order, so results are bitwise identical for any thread count as long
// as fn writes disjoint outputs per index.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace mfm
