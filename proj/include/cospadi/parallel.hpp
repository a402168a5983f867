#pragma once

#include <cstddef>
#include <functional>

namespace cospadi {

// Worker count from COSPADI_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

// Runs body(i) for i in [0, n) across up to worker_count() threads in
// contiguous chunks. Callers must write only to per-index outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cospadi
