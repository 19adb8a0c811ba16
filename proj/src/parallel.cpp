#include "quadclass/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace quadclass {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QUADCLASS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n_chunks, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
  parallel_for_workers(n_chunks, threads, [&](std::size_t chunk, unsigned) { body(chunk); });
}

unsigned worker_count(std::size_t n_chunks, unsigned threads) {
  return static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n_chunks, 1)));
}

void parallel_for_workers(std::size_t n_chunks, unsigned threads,
                          const std::function<void(std::size_t, unsigned)>& body) {
  if (n_chunks == 0) return;
  const unsigned workers = worker_count(n_chunks, threads);
  if (workers == 1) {
    for (std::size_t i = 0; i < n_chunks; ++i) body(i, 0);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](unsigned worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_chunks) return;
      try {
        body(i, worker);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_chunks);
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace quadclass
