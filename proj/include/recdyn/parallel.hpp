#ifndef RECDYN_PARALLEL_HPP
#define RECDYN_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace recdyn {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap{0};
    return cap;
}
// Nested parallel calls from a worker run inline.
inline bool& in_worker() {
    thread_local bool flag = false;
    return flag;
}
}  // namespace detail

/// Caps worker threads for all library routines; 0 restores the default
/// (RECDYN_THREADS if set, otherwise hardware concurrency).
inline void set_max_threads(unsigned n) { detail::thread_cap() = n; }

inline unsigned max_threads() {
    if (unsigned cap = detail::thread_cap().load(); cap > 0) return cap;
    if (const char* env = std::getenv("RECDYN_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(chunk) for chunk in [0, chunks). Chunks are claimed dynamically;
/// callers that need determinism must make each chunk's result depend on the
/// chunk index only and reduce in index order.
template <class Body>
void parallel_chunks(std::size_t chunks, Body&& body) {
    unsigned workers = detail::in_worker() ? 1u : static_cast<unsigned>(std::min<std::size_t>(max_threads(), chunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) body(c);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        detail::in_worker() = true;
        try {
            for (std::size_t c = next++; c < chunks; c = next++) body(c);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = chunks;
        }
        detail::in_worker() = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Splits [0, n) into contiguous ranges and runs body(begin, end) on each.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_grain = 4096) {
    if (n == 0) return;
    std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n / min_grain, 8 * max_threads()));
    std::size_t step = (n + chunks - 1) / chunks;
    parallel_chunks(chunks, [&](std::size_t c) {
        std::size_t begin = c * step;
        std::size_t end = std::min(n, begin + step);
        if (begin < end) body(begin, end);
    });
}

}  // namespace recdyn

#endif  // RECDYN_PARALLEL_HPP
