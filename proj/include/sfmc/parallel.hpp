#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "sfmc/types.hpp"

namespace sfmc {

// Number of worker threads: SFMC_THREADS if set, else hardware concurrency.
inline int thread_budget() {
  if (const char* env = std::getenv("SFMC_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static-chunk parallel loop over [0, n). The first exception thrown by any
// task is rethrown on the calling thread.
template <class F>
void parallel_for(Index n, F&& body, int nthreads = 0) {
  if (nthreads <= 0) nthreads = thread_budget();
  if (n <= 0) return;
  if (nthreads == 1 || n == 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  const int workers = static_cast<int>(std::min<Index>(nthreads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mutex;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (Index i = t; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sfmc
