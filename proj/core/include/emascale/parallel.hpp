#pragma once

#include <cstddef>
#include <functional>

namespace emascale {

/// Resolves a thread request; 0 means "auto" (hardware concurrency).
std::size_t resolve_threads(std::size_t requested) noexcept;

/// Runs body(i) for i in [0, n) on up to `threads` worker threads. Each index
/// runs exactly once; callers write results to slot i and reduce in index
/// order afterwards, which keeps results independent of the thread count.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace emascale
