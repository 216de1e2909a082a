#include "reco/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace reco {

namespace {
std::atomic<unsigned> g_thread_cap{0};

unsigned effective_threads(std::size_t n) {
    unsigned cap = g_thread_cap.load();
    if (cap == 0) cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (n < cap) cap = static_cast<unsigned>(n);
    return cap;
}
}  // namespace

void set_thread_cap(unsigned n) { g_thread_cap.store(n); }

unsigned thread_cap() {
    unsigned cap = g_thread_cap.load();
    return cap == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cap;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const unsigned workers = effective_threads(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const unsigned workers = effective_threads(n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace reco
