#pragma once

#include <cstddef>
#include <functional>

namespace asif {

/// Threads to use when the caller passes 0: ASIF_THREADS if set and valid,
/// otherwise std::thread::hardware_concurrency() (at least 1).
unsigned default_thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
/// workers. The first exception thrown by any chunk is rethrown.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace asif
