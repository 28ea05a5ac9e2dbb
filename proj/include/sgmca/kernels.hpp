#pragma once

#include <cstddef>

namespace sgmca::kernels {

/// c = a * b with a (m x k), b (k x n), row-major. Parallel over rows of c;
/// each output element is produced by exactly one iteration, so the result is
/// bitwise identical to the serial kernel for any thread count.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

/// One dilated B3-spline smoothing pass (taps 1,4,6,4,1 / 16 at offsets
/// {-2s, -s, 0, s, 2s}) applied separably to a width x height image with
/// mirror (reflect-101) boundaries.
void b3_smooth(const double* in, double* out, std::size_t width, std::size_t height,
               std::size_t step, double* scratch);

namespace serial {

/// Reference kernels; same arithmetic, no threading. Kept for tests and the
/// kernel benchmark.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

void b3_smooth(const double* in, double* out, std::size_t width, std::size_t height,
               std::size_t step, double* scratch);

} // namespace serial

} // namespace sgmca::kernels
