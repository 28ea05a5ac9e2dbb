// Timing comparison of the OpenMP kernels against the serial reference, plus
// a bitwise-equality check (the parallel kernels assign each output element in
// exactly one iteration, so results must match exactly).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sgmca/kernels.hpp"
#include "sgmca/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

template <typename F>
double time_best_of(F&& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    sgmca::Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    return v;
}

void bench_matmul(std::size_t m, std::size_t k, std::size_t n) {
    const std::vector<double> a = random_vec(m * k, 1);
    const std::vector<double> b = random_vec(k * n, 2);
    std::vector<double> c_par(m * n), c_ser(m * n);

    const double t_ser = time_best_of(
        [&] { sgmca::kernels::serial::matmul(a.data(), b.data(), c_ser.data(), m, k, n); }, 3);
    const double t_par = time_best_of(
        [&] { sgmca::kernels::matmul(a.data(), b.data(), c_par.data(), m, k, n); }, 3);
    const bool exact = std::memcmp(c_par.data(), c_ser.data(), m * n * sizeof(double)) == 0;

    std::printf("matmul %4zux%-4zu * %4zux%-4zu  serial %8.3f ms  parallel %8.3f ms  "
                "speedup %5.2fx  bitwise %s\n",
                m, k, k, n, t_ser * 1e3, t_par * 1e3, t_ser / t_par,
                exact ? "equal" : "DIFFER");
}

void bench_smooth(std::size_t width, std::size_t height, std::size_t step) {
    const std::vector<double> in = random_vec(width * height, 3);
    std::vector<double> out_par(width * height), out_ser(width * height);
    std::vector<double> scratch_par(width * height), scratch_ser(width * height);

    const double t_ser = time_best_of(
        [&] {
            sgmca::kernels::serial::b3_smooth(in.data(), out_ser.data(), width, height, step,
                                              scratch_ser.data());
        },
        5);
    const double t_par = time_best_of(
        [&] {
            sgmca::kernels::b3_smooth(in.data(), out_par.data(), width, height, step,
                                      scratch_par.data());
        },
        5);
    const bool exact =
        std::memcmp(out_par.data(), out_ser.data(), width * height * sizeof(double)) == 0;

    std::printf("b3_smooth %4zux%-4zu step %2zu     serial %8.3f ms  parallel %8.3f ms  "
                "speedup %5.2fx  bitwise %s\n",
                width, height, step, t_ser * 1e3, t_par * 1e3, t_ser / t_par,
                exact ? "equal" : "DIFFER");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not enabled; both columns run the same serial code\n");
#endif

    bench_matmul(64, 4096, 8);
    bench_matmul(256, 256, 256);
    bench_matmul(40, 4096, 40);

    bench_smooth(256, 256, 1);
    bench_smooth(256, 256, 4);
    bench_smooth(512, 512, 1);
    return 0;
}
