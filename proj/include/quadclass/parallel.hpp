#pragma once

#include <cstddef>
#include <functional>

namespace quadclass {

// Resolves a worker count: an explicit request wins, then QUADCLASS_THREADS,
// then the hardware concurrency. Never returns 0.
unsigned resolve_threads(unsigned requested = 0);

// Runs body(chunk) for chunk in [0, n_chunks) on up to `threads` workers.
// Chunks are claimed dynamically; callers must write results into
// chunk-indexed slots so the merged output is independent of scheduling.
// The first exception thrown by any chunk is rethrown on the calling thread.
void parallel_for(std::size_t n_chunks, unsigned threads,
                  const std::function<void(std::size_t)>& body);

// Workers parallel_for_workers would start for this many chunks.
unsigned worker_count(std::size_t n_chunks, unsigned threads);

// As parallel_for, also passing the worker index in [0, worker_count(...))
// so callers can keep per-worker scratch state.
void parallel_for_workers(std::size_t n_chunks, unsigned threads,
                          const std::function<void(std::size_t, unsigned)>& body);

}  // namespace quadclass
