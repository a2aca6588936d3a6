#pragma once

#include <cstddef>
#include <functional>

namespace skelbench {

// Worker count: SKELBENCH_THREADS if set and nonzero, otherwise the hardware
// thread count. Read once at first use.
std::size_t worker_count();

// Runs fn(begin, end) over a static block partition of [0, n). Every index is
// processed by exactly one invocation, so writes to disjoint per-index slots
// are race-free and results do not depend on the schedule. Reductions across
// indices must be done by the caller in a fixed order afterwards.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace skelbench
