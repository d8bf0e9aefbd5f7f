#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tlmc {

inline int default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(i) for i in [0, n) over `threads` workers pulling chunks from a
// shared counter. With threads <= 1 the loop runs inline, in order.
template <class Body>
void parallel_for(int n, int threads, Body&& body, int chunk = 1) {
    if (n <= 0) return;
    if (threads <= 1 || n <= chunk) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            int begin = next.fetch_add(chunk);
            if (begin >= n) return;
            int end = std::min(n, begin + chunk);
            try {
                for (int i = begin; i < end; ++i) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    int count = std::min(threads, (n + chunk - 1) / chunk);
    std::vector<std::thread> pool;
    pool.reserve(count - 1);
    for (int t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace tlmc
