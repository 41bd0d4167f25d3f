#pragma once

#include <cstddef>
#include <functional>

namespace gyolo {

/// Worker cap: GYOLO_THREADS if set and positive, else hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, count) on up to worker_count() threads. Each index
/// runs exactly once; callers keep results per index so reductions stay
/// deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace gyolo
