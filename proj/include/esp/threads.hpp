#pragma once

// Deterministic data-parallel helper. Work is split into contiguous index
// blocks; every reduction in the library is per-element or fixed-order, so
// results are bit-identical for any thread count.

#include <cstdint>
#include <thread>
#include <vector>

namespace esp {

// Global worker count (1 = serial). The CLI sets this from --threads.
inline int& thread_count() {
    static int n = 1;
    return n;
}

namespace detail {

template <class Body>
void parallel_for(std::int64_t n, Body&& body) {
    int T = thread_count();
    if (T < 2 || n < 2 * T) {
        body(std::int64_t{0}, n);
        return;
    }
    if (T > n) T = static_cast<int>(n);
    std::vector<std::thread> pool;
    pool.reserve(T - 1);
    std::int64_t chunk = (n + T - 1) / T;
    for (int t = 1; t < T; ++t) {
        std::int64_t b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    body(std::int64_t{0}, std::min(n, chunk));
    for (auto& th : pool) th.join();
}

}  // namespace detail
}  // namespace esp
