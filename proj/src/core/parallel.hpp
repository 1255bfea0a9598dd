#pragma once

#include <cstddef>
#include <functional>

namespace krr {

// Worker count for data-parallel loops: min(KRR_THREADS, hardware), where
// KRR_THREADS unset or 0 means hardware concurrency.
std::size_t worker_count();

// Runs fn(i) for each i in [0, count), partitioned over workers. fn must only
// write to per-index slots; no ordering is guaranteed, so callers aggregate in
// index order afterwards to keep output independent of the schedule.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace krr
