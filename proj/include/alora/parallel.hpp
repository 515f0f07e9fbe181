#pragma once

#include <cstddef>
#include <exception>

namespace alora {

/// Runs fn(i) for i in [0, n) across OpenMP threads when `parallel` holds.
/// The first exception thrown by any iteration is rethrown on the caller.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, bool parallel = true) {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel && n > 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(alora_parallel_for)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace alora
