#pragma once

#include <cstddef>
#include <functional>

namespace koopid {

/// Thread count from the KOOPID_THREADS environment variable, else the
/// hardware concurrency (at least 1).
unsigned default_thread_count();

/// Calls body(i) for i in [0, n) on up to `threads` workers. Iterations must
/// be independent; results are expected to be written to per-index slots.
/// The first exception thrown by any iteration is rethrown after all workers
/// have joined.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

} // namespace koopid
