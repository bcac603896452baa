#pragma once

// OpenMP loop helpers. Every parallel kernel in the library writes each
// iteration's result into its own slot, so output is bit-identical for any
// thread count.

#include <cstddef>
#include <exception>
#include <limits>

#include <omp.h>

namespace alloyfit {

/// Sets the OpenMP team size used by all kernels. jobs <= 0 keeps the runtime default.
inline void set_jobs(int jobs) {
    if (jobs > 0) omp_set_num_threads(jobs);
}

inline int current_jobs() { return omp_get_max_threads(); }

/// Runs fn(i) for i in [0, n) across the OpenMP team. If iterations throw,
/// the exception from the lowest index is rethrown after the loop.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::size_t failed_at = std::numeric_limits<std::size_t>::max();
    std::exception_ptr error;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(alloyfit_parallel_for_error)
            {
                if (static_cast<std::size_t>(i) < failed_at) {
                    failed_at = static_cast<std::size_t>(i);
                    error = std::current_exception();
                }
            }
        }
    }
    if (error) std::rethrow_exception(error);
}

/// Static-schedule variant for short uniform iterations; only used where fn cannot throw.
template <typename Fn>
void parallel_for_static(std::size_t n, Fn&& fn, std::size_t min_parallel = 256) {
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= min_parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

}  // namespace alloyfit
