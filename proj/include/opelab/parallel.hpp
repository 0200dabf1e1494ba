#pragma once

#include <cstddef>
#include <functional>

namespace opelab {

// Resolves a requested worker count: 0 means "use hardware concurrency".
unsigned resolve_workers(unsigned requested);

// Runs body(i) for i in [0, n) on up to `workers` threads with a static
// contiguous partition.  Bodies must write only to their own slot i, which
// makes results independent of the worker count; callers then reduce slots
// in index order so floating-point output is bitwise reproducible.
// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace opelab
