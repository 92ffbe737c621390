#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace impulse {

// Chunked parallel loop over [0, n).  Results must go to disjoint slots so
// the outcome is independent of scheduling; reductions happen sequentially
// afterwards.  IMPULSE_THREADS overrides the thread count (1 disables).
template <class F>
void parallel_for(long long n, F&& body) {
    unsigned threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("IMPULSE_THREADS")) {
        const long t = std::strtol(env, nullptr, 10);
        if (t > 0) threads = static_cast<unsigned>(t);
    }
    if (threads <= 1 || n < 64) {
        for (long long i = 0; i < n; ++i) body(i);
        return;
    }
    const long long chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        const long long lo = t * chunk;
        const long long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (long long i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace impulse
