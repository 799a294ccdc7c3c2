#include "martlab/parallel.hpp"

#include <thread>
#include <vector>

namespace martlab {

unsigned default_thread_count() {
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

void parallel_for(std::size_t n, unsigned n_threads,
                  const std::function<void(std::size_t, unsigned)>& body) {
    if (n == 0) return;
    if (n_threads <= 1 || n < 2 * n_threads) {
        for (std::size_t i = 0; i < n; ++i) body(i, 0);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
        std::size_t lo = n * t / n_threads;
        std::size_t hi = n * (t + 1) / n_threads;
        workers.emplace_back([lo, hi, t, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i, t);
        });
    }
    for (auto& w : workers) w.join();
}

}  // namespace martlab
