#include "sgmca/kernels.hpp"

#include <cstdint>

namespace sgmca::kernels {

namespace {

inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t i, std::size_t k, std::size_t n) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
        const double av = ai[l];
        const double* bl = b + l * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bl[j];
    }
}

// Mirror (reflect-101) index: -1 -> 1, n -> n-2. Folds until in range so it
// stays valid even when the dilated stencil exceeds the image size.
inline std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    i = i % period;
    if (i < 0) i += period;
    if (i >= n) i = period - i;
    return i;
}

inline void b3_smooth_impl(const double* in, double* out, std::size_t width, std::size_t height,
                           std::size_t step, double* scratch) {
    static constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
    const auto w = static_cast<std::ptrdiff_t>(width);
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto s = static_cast<std::ptrdiff_t>(step);
    // Horizontal pass into scratch.
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        const double* row = in + y * w;
        double* dst = scratch + y * w;
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += kTaps[t + 2] * row[reflect(x + t * s, w)];
            dst[x] = acc;
        }
    }
    // Vertical pass into out.
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        double* dst = out + y * w;
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t)
                acc += kTaps[t + 2] * scratch[reflect(y + t * s, h) * w + x];
            dst[x] = acc;
        }
    }
}

} // namespace

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    const auto mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < mm; ++i)
        matmul_row(a, b, c, static_cast<std::size_t>(i), k, n);
}

void b3_smooth(const double* in, double* out, std::size_t width, std::size_t height,
               std::size_t step, double* scratch) {
    b3_smooth_impl(in, out, width, height, step, scratch);
}

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void b3_smooth(const double* in, double* out, std::size_t width, std::size_t height,
               std::size_t step, double* scratch) {
    b3_smooth_impl(in, out, width, height, step, scratch);
}

} // namespace serial

} // namespace sgmca::kernels
