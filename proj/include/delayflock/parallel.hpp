#pragma once

#include <cstddef>
#include <functional>

namespace delayflock {

/// Worker cap: DELAYFLOCK_THREADS when set to a positive integer, otherwise
/// the hardware concurrency (at least 1).
std::size_t workerLimit();

/// Calls body(i) for i in [0, count) on up to workerLimit() threads. Each
/// index is visited exactly once; callers write results into per-index
/// slots and reduce afterwards, so output does not depend on scheduling.
void parallelFor(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace delayflock
