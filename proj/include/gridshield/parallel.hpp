#pragma once

#include <functional>

namespace gridshield {

// Worker count: GRIDSHIELD_THREADS env var if set (>=1), else hardware
// concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) across workers. Tasks must be independent;
// callers own any index-addressed output slots, so parallel and serial runs
// produce identical results. The first exception thrown by a task is
// rethrown after all workers join.
void parallel_for(int n, const std::function<void(int)>& fn, int threads = 0);

}  // namespace gridshield
