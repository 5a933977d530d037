#include "mfm/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mfm {

int max_threads() {
  static const int n = [] {
    if (const char* env = std::getenv("MFM_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return n;
}

namespace {

// Minimal persistent pool: one task generation at a time, caller participates.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i + 1); });
    }
  }

  ~Pool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int parts, const std::function<void(int)>& part_fn) {
    {
      std::unique_lock lk(mu_);
      part_fn_ = &part_fn;
      parts_ = parts;
      pending_ = parts - 1;  // caller takes part 0
      ++generation_;
    }
    cv_.notify_all();
    part_fn(0);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    part_fn_ = nullptr;
  }

 private:
  void worker_loop(int index) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn = nullptr;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (index >= parts_) continue;
        fn = part_fn_;
      }
      (*fn)(index);
      {
        std::unique_lock lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* part_fn_ = nullptr;
  int parts_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p(max_threads() - 1);
  return p;
}

}  // namespace

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int threads = max_threads();
  if (threads == 1 || n < 4096) {
    fn(0, n);
    return;
  }
  const int parts = static_cast<int>(std::min<int64_t>(threads, n));
  const int64_t chunk = (n + parts - 1) / parts;
  pool().run(parts, [&](int p) {
    const int64_t begin = p * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin < end) fn(begin, end);
  });
}

}  // namespace mfm
