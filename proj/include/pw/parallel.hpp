#pragma once

#include <cstddef>
#include <functional>

namespace pw {

/// Worker count: PW_THREADS if set and positive, otherwise hardware concurrency (at least 1).
unsigned worker_count();

/// Runs fn(i) for i in [0, n) over contiguous chunks. Callers must only write to slots owned by i,
/// so results are identical to a sequential loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace pw
