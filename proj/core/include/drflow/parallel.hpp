#pragma once

#include <cstddef>
#include <functional>

namespace drflow {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results
/// must be written to pre-allocated per-index slots so the outcome is
/// independent of scheduling. workers == 0 means hardware concurrency.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

} // namespace drflow
