#include "cpsl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace cpsl {
namespace {

int defaultThreads() {
  if (const char* env = std::getenv("CPSL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

thread_local bool tInsidePool = false;

struct Job {
  const std::function<void(int)>* task = nullptr;
  int chunks = 0;
  std::atomic<int> next{0};
  std::atomic<int> pending{0};
};

class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { loop(); });
    }
  }
  ~Pool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  void run(int chunks, const std::function<void(int)>& task) {
    std::lock_guard runLock(runMu_);
    auto job = std::make_shared<Job>();
    job->task = &task;
    job->chunks = chunks;
    job->pending.store(chunks);
    {
      std::lock_guard lock(mu_);
      job_ = job;
      ++generation_;
    }
    cv_.notify_all();
    drain(*job);
    std::unique_lock lock(mu_);
    done_.wait(lock, [&] { return job->pending.load() == 0; });
    job_.reset();
  }

 private:
  void drain(Job& job) {
    const bool was = tInsidePool;
    tInsidePool = true;
    for (;;) {
      const int i = job.next.fetch_add(1);
      if (i >= job.chunks) break;
      (*job.task)(i);
      if (job.pending.fetch_sub(1) == 1) {
        std::lock_guard lock(mu_);
        done_.notify_all();
      }
    }
    tInsidePool = was;
  }

  void loop() {
    std::uint64_t seen = 0;
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || (generation_ != seen && job_); });
        if (stop_) return;
        seen = generation_;
        job = job_;
      }
      drain(*job);
    }
  }

  std::vector<std::thread> threads_;
  std::mutex runMu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_;
  std::shared_ptr<Job> job_;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

std::mutex gPoolMu;
int gThreads = 0;
std::unique_ptr<Pool> gPool;

Pool* pool() {
  std::lock_guard lock(gPoolMu);
  if (gThreads <= 0) gThreads = defaultThreads();
  if (gThreads <= 1) return nullptr;
  if (!gPool || gPool->size() != gThreads) {
    gPool.reset();
    gPool = std::make_unique<Pool>(gThreads - 1);
  }
  return gPool.get();
}

}  // namespace

void setThreadCount(int n) {
  std::lock_guard lock(gPoolMu);
  gThreads = n > 0 ? n : defaultThreads();
  if (gPool && gPool->size() != gThreads) gPool.reset();
}

int threadCount() {
  std::lock_guard lock(gPoolMu);
  if (gThreads <= 0) gThreads = defaultThreads();
  return gThreads;
}

void parallelFor(int first, int last, const std::function<void(int, int)>& fn, int grain) {
  if (last <= first) return;
  grain = std::max(1, grain);
  const int n = last - first;
  Pool* p = tInsidePool ? nullptr : pool();
  if (!p || n <= grain) {
    fn(first, last);
    return;
  }
  const int chunks = std::min((n + grain - 1) / grain, p->size() * 4);
  const int per = (n + chunks - 1) / chunks;
  p->run(chunks, [&](int c) {
    const int b = first + c * per;
    const int e = std::min(last, b + per);
    if (b < e) fn(b, e);
  });
}

}  // namespace cpsl
