#pragma once

#include <cstddef>
#include <functional>

namespace singular_drift {

/// Worker count: SINGULAR_DRIFT_THREADS if set and positive, otherwise the
/// hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, n) over a static partition of worker_count()
/// threads. Results must not depend on the partition; the first exception
/// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace singular_drift
