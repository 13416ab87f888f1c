#pragma once

#include <cstddef>
#include <functional>

namespace keepclose {

// Worker count: hardware concurrency, capped by KEEPCLOSE_THREADS when set.
std::size_t worker_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write into per-index slots so results do not depend on scheduling. The
// first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace keepclose
