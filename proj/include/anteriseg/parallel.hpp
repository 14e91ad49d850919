#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace anteriseg {

/// Worker count: explicit request if > 0, else ANTERISEG_THREADS, else
/// hardware concurrency. ANTERISEG_THREADS also caps explicit requests.
inline unsigned worker_count(unsigned requested = 0) {
    unsigned cap = 0;
    if (const char* env = std::getenv("ANTERISEG_THREADS")) {
        try {
            cap = static_cast<unsigned>(std::stoul(env));
        } catch (...) {
            cap = 0;
        }
    }
    unsigned n = requested > 0 ? requested : (cap > 0 ? cap : std::thread::hardware_concurrency());
    if (cap > 0) n = std::min(n, cap);
    return std::max(1u, n);
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index runs
/// exactly once; callers write results into per-index slots. The first
/// exception thrown (lowest index) is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::size_t err_index = count;
    std::exception_ptr err;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace anteriseg
