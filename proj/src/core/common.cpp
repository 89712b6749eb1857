#include "core/common.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace zsim {

void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    threads = std::max(1, threads);
    if (threads == 1 || n == 1) {
        fn(0, n);
        return;
    }
    int64_t workers = std::min<int64_t>(threads, n);
    int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    std::exception_ptr first_error;
    std::mutex err_mu;
    for (int64_t w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

int parallel_chunks(int64_t n, int threads, const std::function<void(int, int64_t, int64_t)>& fn) {
    if (n <= 0) return 0;
    threads = std::max(1, threads);
    int64_t workers = std::min<int64_t>(threads, n);
    int64_t chunk = (n + workers - 1) / workers;
    if (workers == 1) {
        fn(0, 0, n);
        return 1;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mu;
    int slots = 0;
    for (int64_t w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        ++slots;
        pool.emplace_back([&, w, lo, hi] {
            try {
                fn(int(w), lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return slots;
}

}  // namespace zsim
