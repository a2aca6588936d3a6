#include "skelbench/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace skelbench {

namespace {

std::size_t detect_workers() {
    if (const char* env = std::getenv("SKELBENCH_THREADS")) {
        const long v = std::atol(env);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Persistent pool; workers sleep between parallel_for calls. Only the main
// thread may submit work (library contract: one orchestrating thread).
class Pool {
public:
    explicit Pool(std::size_t workers) {
        for (std::size_t i = 0; i + 1 < workers; ++i) {
            threads_.emplace_back([this, slot = i] { run(slot); });
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

    void dispatch(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
        const std::size_t parts = threads_.size() + 1;
        const std::size_t chunk = (n + parts - 1) / parts;
        {
            std::lock_guard lock(mu_);
            fn_ = &fn;
            total_ = n;
            chunk_ = chunk;
            pending_ = threads_.size();
            ++generation_;
        }
        cv_.notify_all();
        run_block(0, n, chunk, fn); // main thread takes slot 0
        std::unique_lock lock(mu_);
        done_cv_.wait(lock, [this] { return pending_ == 0; });
        fn_ = nullptr;
    }

private:
    static void run_block(std::size_t slot, std::size_t n, std::size_t chunk,
                          const std::function<void(std::size_t, std::size_t)>& fn) {
        const std::size_t begin = slot * chunk;
        if (begin >= n) return;
        const std::size_t end = std::min(n, begin + chunk);
        fn(begin, end);
    }

    void run(std::size_t slot) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
            std::size_t n = 0, chunk = 0;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = fn_;
                n = total_;
                chunk = chunk_;
            }
            run_block(slot + 1, n, chunk, *fn);
            {
                std::lock_guard lock(mu_);
                --pending_;
            }
            done_cv_.notify_one();
        }
    }

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(std::size_t, std::size_t)>* fn_ = nullptr;
    std::size_t total_ = 0, chunk_ = 0, pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

} // namespace

std::size_t worker_count() {
    static const std::size_t n = detect_workers();
    return n;
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = worker_count();
    if (workers <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    static Pool pool(workers);
    pool.dispatch(n, fn);
}

} // namespace skelbench
