#pragma once
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace gwkg {

// Runs fn(begin, end) over a contiguous partition of [0, n). Each range is
// disjoint, so callers that only write state indexed by their own range get
// identical results no matter how many workers run.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                         std::size_t min_grain = 256) {
    if (n == 0) return;
    std::size_t workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers > 1 && n / workers < min_grain) workers = std::max<std::size_t>(1, n / min_grain);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(fn, begin, end);
    }
    for (auto& t : threads) t.join();
}

} // namespace gwkg
