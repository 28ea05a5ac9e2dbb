#pragma once

#include "sgmca/matrix.hpp"

namespace sgmca {

/// Undecimated isotropic wavelet coefficients for a stack of flattened 2-D
/// images (one image per matrix row). Additive reconstruction: the detail
/// scales plus the coarse scale sum back to the input exactly.
struct StarletCoeffs {
    std::size_t n_scales = 0;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Matrix> details;  // details[j] has the same shape as the input
    Matrix coarse;

    std::size_t n_images() const { return coarse.rows(); }
};

/// A-trous decomposition with the separable B3-spline kernel (1,4,6,4,1)/16,
/// dilated by 2^j at scale j, mirror boundaries. Rows are processed
/// independently (parallel over images).
StarletCoeffs starlet_forward(const Matrix& images, std::size_t width, std::size_t height,
                              std::size_t n_scales);

/// Sum of all detail scales plus the coarse scale.
Matrix starlet_inverse(const StarletCoeffs& coeffs);

} // namespace sgmca
