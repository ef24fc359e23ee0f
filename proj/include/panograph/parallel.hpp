#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace panograph {

// Worker budget: PANOGRAPH_THREADS caps it, hardware concurrency is the
// default, and anything unparseable falls back to 1.
inline int thread_budget() {
  int budget = static_cast<int>(std::thread::hardware_concurrency());
  if (budget <= 0) budget = 1;
  if (const char* env = std::getenv("PANOGRAPH_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed > 0) {
      budget = std::min<long>(budget, parsed);
    } else {
      budget = 1;
    }
  }
  return budget;
}

// Runs fn(0..n-1) across the thread budget. Tasks must only touch their own
// output slots. The first exception wins and is rethrown on the caller.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  const int workers = std::min(n, thread_budget());
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace panograph
