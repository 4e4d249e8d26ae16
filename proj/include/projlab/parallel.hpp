#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace projlab {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work is split
/// into contiguous blocks; callers write results into per-index slots so the
/// outcome never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// Worker count from PROJLAB_THREADS (default 1, minimum 1).
unsigned threads_from_env();

}  // namespace projlab
