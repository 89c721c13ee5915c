#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace qlab {

// Worker count: QLAB_THREADS when set to a positive integer, otherwise the
// available hardware parallelism.
inline unsigned thread_count() {
    if (const char *env = std::getenv("QLAB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception &) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) on up to `threads` workers. Indices are
// handed out dynamically; callers store results by index so the outcome
// does not depend on scheduling. The first exception is rethrown.
template <class Body>
void parallel_for(std::int64_t n, unsigned threads, Body &&body) {
    if (n <= 0) return;
    threads = static_cast<unsigned>(std::min<std::int64_t>(std::max(1u, threads), n));
    if (threads == 1) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::int64_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        next = n;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace qlab
