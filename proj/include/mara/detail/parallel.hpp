#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mara::detail {

// Runs fn(i) for i in [0, n) across up to max_workers threads. Work items
// write to caller-owned slots keyed by i, so the result is identical for
// any worker count. The lowest-index exception is rethrown after join.
inline void parallel_for(size_t n, size_t max_workers, const std::function<void(size_t)>& fn) {
    if (n == 0) return;
    size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 4;
    size_t workers = std::min({n, max_workers == 0 ? hw : max_workers, hw});
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
    }
}

}  // namespace mara::detail
