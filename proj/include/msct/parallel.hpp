#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace msct {

// 0 means "use hardware concurrency".
inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested == 0)
        requested = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return requested;
}

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
/// workers. Callers write to disjoint slots; any reduction happens afterwards
/// in index order, so results do not depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body)
{
    threads = std::min(resolve_threads(threads), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        body(std::size_t { 0 }, n);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t b = std::min(n, t * chunk);
            const std::size_t e = std::min(n, b + chunk);
            pool.emplace_back([&, t, b, e] {
                try {
                    body(b, e);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& err : errors)
        if (err)
            std::rethrow_exception(err);
}

/// Pairwise summation over values in index order.
inline double pairwise_sum(const double* v, std::size_t n)
{
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

} // namespace msct
