#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace wegpipe {

// Worker cap: WEGPIPE_THREADS if set, hardware concurrency otherwise.
inline int64_t worker_count() {
    if (const char* env = std::getenv("WEGPIPE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int64_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int64_t>(hw) : 1;
}

// Static round-robin partition: index i runs on worker i % T. Each call of
// fn must only touch its own slot of any shared output so results do not
// depend on scheduling.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn, int64_t threads = 0) {
    if (threads <= 0) threads = worker_count();
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int64_t t = 0; t < threads; ++t) {
        pool.emplace_back([t, n, threads, &fn] {
            for (int64_t i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace wegpipe
