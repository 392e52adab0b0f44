#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

#include <omp.h>

namespace sgdyn {

/// OpenMP loop over [0, n) that forwards the first exception thrown by `body`
/// to the caller once all workers have finished.
template <class Body>
void parallel_for(std::size_t n, Body&& body, int chunk = 1) {
    std::exception_ptr error;
    std::mutex guard;
#pragma omp parallel for schedule(dynamic, chunk)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(guard);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace sgdyn
