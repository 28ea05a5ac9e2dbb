#include "sgmca/starlet.hpp"

#include <stdexcept>
#include <string>

#include "sgmca/kernels.hpp"

namespace sgmca {

StarletCoeffs starlet_forward(const Matrix& images, std::size_t width, std::size_t height,
                              std::size_t n_scales) {
    if (width * height != images.cols())
        throw std::invalid_argument("starlet_forward: width*height = " +
                                    std::to_string(width * height) + " but images have " +
                                    std::to_string(images.cols()) + " pixels");
    if (n_scales < 1) throw std::invalid_argument("starlet_forward: n_scales must be >= 1");
    const std::size_t span = std::size_t{1} << n_scales;
    if (width < span || height < span)
        throw std::invalid_argument("starlet_forward: image dims must be >= 2^n_scales");

    StarletCoeffs out;
    out.n_scales = n_scales;
    out.width = width;
    out.height = height;
    out.details.assign(n_scales, Matrix(images.rows(), images.cols()));
    out.coarse = Matrix(images.rows(), images.cols());

    const auto n_img = static_cast<std::ptrdiff_t>(images.rows());
    const std::size_t npix = width * height;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < n_img; ++r) {
        std::vector<double> smooth(images.row(r).begin(), images.row(r).end());
        std::vector<double> next(npix), scratch(npix);
        for (std::size_t j = 0; j < n_scales; ++j) {
            kernels::b3_smooth(smooth.data(), next.data(), width, height, std::size_t{1} << j,
                               scratch.data());
            double* det = out.details[j].row(r).data();
            for (std::size_t p = 0; p < npix; ++p) det[p] = smooth[p] - next[p];
            smooth.swap(next);
        }
        out.coarse.set_row(r, smooth);
    }
    return out;
}

Matrix starlet_inverse(const StarletCoeffs& coeffs) {
    Matrix out = coeffs.coarse;
    for (const Matrix& d : coeffs.details) out += d;
    return out;
}

} // namespace sgmca
