#pragma once

// Fork-join parallel loops over a fixed pool of worker threads.
//
// parallel_for(n, fn) runs fn(0..n-1) and returns once all calls finished.
// Calls made from inside a worker (nested parallelism) and pools of a single
// thread run serially on the caller. If any call throws, the exception from
// the lowest failing index is rethrown, so failures are schedule-independent.

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fcirk {

class Executor {
 public:
  // threads <= 0 selects std::thread::hardware_concurrency().
  explicit Executor(int threads = 1);
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  int threads() const { return static_cast<int>(workers_.size()) + 1; }

  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  struct Job {
    const std::function<void(std::size_t)>* fn = nullptr;
    std::size_t n = 0;
    std::size_t next = 0;
    std::size_t done = 0;
    std::size_t error_index = 0;
    std::exception_ptr error;
  };

  void worker_loop();
  // Runs indices of the current job until none are left. Requires the lock.
  void drain(std::unique_lock<std::mutex>& lock, Job& job);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable finished_;
  Job* job_ = nullptr;
  std::size_t generation_ = 0;
  bool stop_ = false;
};

// Runs fn(0..n-1) on `exec`, or serially when exec is null.
inline void parallel_for(Executor* exec, std::size_t n,
                         const std::function<void(std::size_t)>& fn) {
  if (exec == nullptr) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  exec->parallel_for(n, fn);
}

}  // namespace fcirk
