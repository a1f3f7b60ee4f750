#include "pano3d/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pano3d {
namespace {

int read_env_threads() {
  const char* env = std::getenv("PANO3D_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

std::atomic<int>& threads_setting() {
  static std::atomic<int> n{read_env_threads()};
  return n;
}

}  // namespace

int thread_count() { return threads_setting().load(); }

void set_thread_count(int n) { threads_setting().store(n < 1 ? 1 : n); }

void parallel_rows(int rows, const std::function<void(int)>& body) {
  const int workers = std::min(thread_count(), rows);
  if (workers <= 1) {
    for (int r = 0; r < rows; ++r) body(r);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(rows) * w / workers);
    const int end = static_cast<int>(static_cast<long long>(rows) * (w + 1) / workers);
    pool.emplace_back([&, begin, end] {
      try {
        for (int r = begin; r < end; ++r) body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pano3d
