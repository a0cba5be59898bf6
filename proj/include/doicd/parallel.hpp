#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace doicd {

/// Evaluates fn(0..n-1) on up to `workers` threads and returns the results in
/// index order. If any call throws, the exception of the lowest failing index
/// is rethrown after all workers finish.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
    using R = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<std::optional<R>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto drain = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const auto threads = std::min(std::max<std::size_t>(workers, 1), n);
    if (threads <= 1) {
        drain();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(drain);
    }

    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots)
        out.push_back(std::move(*s));
    return out;
}

inline std::size_t default_worker_count() {
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace doicd
