#pragma once

#include "sgmca/matrix.hpp"

namespace sgmca {

/// Thin SVD: input == u * diag(singular_values) * vt, u with orthonormal
/// columns, vt with orthonormal rows, singular values sorted descending.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix vt;
};

/// One-sided Jacobi SVD. Deterministic; sized for the small matrices used
/// here (up to a few hundred rows on the short side). Throws std::runtime_error
/// with the matrix dimensions if the sweep cap is hit before convergence.
SvdResult svd(const Matrix& m, std::size_t max_sweeps = 60);

/// Moore-Penrose pseudoinverse; singular values below rcond * s_max are
/// treated as zero.
Matrix pinv(const Matrix& m, double rcond = 1e-12);

/// Solve the square system a*x = b by partial-pivot LU. Throws
/// std::runtime_error on a singular pivot.
std::vector<double> solve_linear(const Matrix& a, std::span<const double> b);

} // namespace sgmca
