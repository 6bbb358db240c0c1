#include "bhsrs/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace bhsrs {
namespace {

std::atomic<bool> g_finite_checks{
#ifdef NDEBUG
    false
#else
    true
#endif
};

thread_local int t_parallel_depth = 0;

}  // namespace

bool finite_checks_enabled() { return g_finite_checks.load(std::memory_order_relaxed); }
void set_finite_checks(bool on) { g_finite_checks.store(on, std::memory_order_relaxed); }

void warn(const std::string& message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[bhsrs] warning: " << message << "\n";
}

int max_threads() {
  if (const char* env = std::getenv("BHSRS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw InputError(cat("BHSRS_THREADS must be a positive integer, got '", env, "'"));
    }
    return static_cast<int>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int workers = std::min<int64_t>(max_threads(), n);
  // Nested parallel sections and trivial loops run inline.
  if (workers <= 1 || t_parallel_depth > 0) {
    ++t_parallel_depth;
    try {
      fn(0, n);
    } catch (...) {
      --t_parallel_depth;
      throw;
    }
    --t_parallel_depth;
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mu;
  int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int64_t begin = w * chunk;
    int64_t end = std::min<int64_t>(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      ++t_parallel_depth;
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
      --t_parallel_depth;
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace bhsrs
