#pragma once

// Fixed-size worker pool for chunked loops.
//
// Work is always split into chunks of a fixed element count that does not
// depend on the number of workers, and reductions are combined in chunk order.
// Results are therefore bitwise identical for any worker count.

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qdecay {

inline constexpr std::size_t kChunkSize = 8192;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunkSize - 1) / kChunkSize; }

class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers = 1) : workers_(std::max<std::size_t>(1, workers)) {
        for (std::size_t w = 1; w < workers_; ++w) {
            threads_.emplace_back([this, w] { worker_loop(w); });
        }
    }

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
            ++generation_;
        }
        wake_.notify_all();
        for (auto& t : threads_) t.join();
    }

    std::size_t workers() const noexcept { return workers_; }

    /// Calls task(chunk) for chunk in [0, n_chunks). Chunks are dealt to workers
    /// round-robin; the call returns once all have finished.
    void run(std::size_t n_chunks, const std::function<void(std::size_t)>& task) {
        if (workers_ == 1 || n_chunks <= 1) {
            for (std::size_t c = 0; c < n_chunks; ++c) task(c);
            return;
        }
        {
            std::lock_guard lock(mutex_);
            task_ = &task;
            n_chunks_ = n_chunks;
            pending_ = workers_ - 1;
            ++generation_;
        }
        wake_.notify_all();
        for (std::size_t c = 0; c < n_chunks; c += workers_) task(c);
        std::unique_lock lock(mutex_);
        done_.wait(lock, [this] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    void worker_loop(std::size_t id) {
        std::size_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t)>* task = nullptr;
            std::size_t n = 0;
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stopping_) return;
                task = task_;
                n = n_chunks_;
            }
            for (std::size_t c = id; c < n; c += workers_) (*task)(c);
            {
                std::lock_guard lock(mutex_);
                if (--pending_ == 0) done_.notify_one();
            }
        }
    }

    std::size_t workers_;
    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* task_ = nullptr;
    std::size_t n_chunks_ = 0;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    bool stopping_ = false;
};

/// Worker count from QDECAY_THREADS, falling back to 1.
inline std::size_t default_thread_count() {
    if (const char* env = std::getenv("QDECAY_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 1;
}

}  // namespace qdecay
