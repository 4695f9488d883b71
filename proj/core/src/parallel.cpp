#include "veritas/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace veritas {

namespace {
std::atomic<int> g_thread_cap{0};
}

void set_thread_cap(int n) { g_thread_cap.store(n < 0 ? 0 : n); }

int effective_threads() {
    const int cap = g_thread_cap.load();
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    const int base = hw > 0 ? hw : 1;
    return cap > 0 ? std::min(cap, base) : base;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t threads = std::min<std::size_t>(effective_threads(), n);
    if (threads <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> workers;
    workers.reserve(threads - 1);
    for (std::size_t t = 1; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        if (begin >= n) break;
        workers.emplace_back(fn, begin, std::min(begin + chunk, n));
    }
    fn(0, std::min(chunk, n));
    for (auto& w : workers) w.join();
}

} // namespace veritas
