#include "executor.hpp"

namespace fcirk {
namespace {

thread_local bool t_inside_worker = false;

}  // namespace

Executor::Executor(int threads) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  workers_.reserve(static_cast<std::size_t>(threads - 1));
  for (int i = 1; i < threads; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

Executor::~Executor() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (std::thread& t : workers_) t.join();
}

void Executor::drain(std::unique_lock<std::mutex>& lock, Job& job) {
  while (job.next < job.n) {
    const std::size_t i = job.next++;
    lock.unlock();
    std::exception_ptr error;
    try {
      (*job.fn)(i);
    } catch (...) {
      error = std::current_exception();
    }
    lock.lock();
    if (error && (!job.error || i < job.error_index)) {
      job.error = error;
      job.error_index = i;
    }
    if (++job.done == job.n) finished_.notify_all();
  }
}

void Executor::worker_loop() {
  t_inside_worker = true;
  std::unique_lock<std::mutex> lock(mutex_);
  std::size_t seen = 0;
  while (true) {
    wake_.wait(lock, [&] { return stop_ || (job_ != nullptr && generation_ != seen); });
    if (stop_) return;
    seen = generation_;
    drain(lock, *job_);
  }
}

void Executor::parallel_for(std::size_t n,
                            const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers_.empty() || n == 1 || t_inside_worker) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  Job job;
  job.fn = &fn;
  job.n = n;
  std::unique_lock<std::mutex> lock(mutex_);
  // A second caller thread waits for the pool to become free.
  finished_.wait(lock, [&] { return job_ == nullptr; });
  job_ = &job;
  ++generation_;
  wake_.notify_all();

  const bool was_inside = t_inside_worker;
  t_inside_worker = true;
  drain(lock, job);
  t_inside_worker = was_inside;

  finished_.wait(lock, [&] { return job.done == job.n; });
  job_ = nullptr;
  finished_.notify_all();
  lock.unlock();
  if (job.error) std::rethrow_exception(job.error);
}

}  // namespace fcirk
