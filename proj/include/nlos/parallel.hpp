#ifndef NLOS_PARALLEL_HPP
#define NLOS_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nlos {

inline unsigned hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Splits [0, n) into contiguous blocks, one per worker, and runs
/// fn(worker_index, begin, end) on each. threads == 1 runs inline.
template <typename Fn>
void parallel_blocks(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = hardware_threads();
    if (threads > n) threads = n == 0 ? 1 : static_cast<unsigned>(n);
    if (threads <= 1) {
        fn(0u, std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < threads; ++w) {
        std::size_t begin = std::min(n, static_cast<std::size_t>(w) * chunk);
        std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nlos

#endif
