#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mcvr {

// Runs fn(i) for i in [0, n) across `threads` workers on contiguous chunks.
// The chunk layout depends only on n and the worker count never affects what
// any fn(i) computes, so callers that fold results in index order stay
// deterministic.
template <typename Fn>
void parallel_for_index(std::size_t n, unsigned threads, Fn&& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (std::size_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace mcvr
