#pragma once

#include <cstddef>
#include <functional>

namespace lungforge {

/// Number of worker threads to use: hardware concurrency, capped by the
/// LUNGFORGE_THREADS environment variable when it holds a positive integer.
std::size_t worker_count();

/// Runs body(i) for every i in [0, n). Work is split into contiguous chunks,
/// one per worker; callers write results into slot i so output order never
/// depends on scheduling. The exception thrown for the smallest index is
/// rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lungforge
