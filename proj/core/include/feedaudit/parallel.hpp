#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace feedaudit {

namespace detail {
inline std::atomic<unsigned> default_threads{0};
}

/// Worker count used when a call passes 0 threads. 0 restores the hardware default.
inline void set_default_threads(unsigned threads) noexcept { detail::default_threads.store(threads); }

inline unsigned default_threads() noexcept {
    const unsigned t = detail::default_threads.load();
    return t ? t : std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on a small worker pool. Callers write
/// results into slot i only, which keeps aggregation order fixed.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned max_threads = 0) {
    unsigned workers = max_threads ? max_threads : default_threads();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace feedaudit
