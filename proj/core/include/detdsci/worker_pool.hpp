#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace detdsci {

/// Runs fn(i) for every i in [0, count) on at most `parallelism` threads.
/// Work is claimed from a shared counter, so completion order varies, but
/// callers write results into slot i and therefore see a deterministic
/// layout. The first exception thrown by fn is rethrown after all workers
/// have stopped.
template <typename Fn>
void for_each_index(std::size_t count, std::size_t parallelism, Fn&& fn)
{
    if (count == 0) {
        return;
    }
    const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count || failed.load(std::memory_order_relaxed)) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) {
            threads.emplace_back(worker);
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace detdsci
