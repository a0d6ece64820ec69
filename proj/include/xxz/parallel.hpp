#pragma once

#include <cstddef>
#include <functional>

namespace xxz {

// Worker count from XXZ_WORKERS, else the hardware concurrency (>= 1).
unsigned default_workers();

// Runs fn(k) for k in [0, count) on up to `workers` threads. Work items must
// write only to their own output slots. If any item throws, the exception of
// the lowest failing index is rethrown after all threads join.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace xxz
