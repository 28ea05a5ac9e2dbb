#pragma once

#include <cstdint>

#include "sgmca/matrix.hpp"

namespace sgmca {

struct NmfOptions {
    std::size_t iters = 500;
    std::uint64_t seed = 0;
    double eps = 1e-16;    // HALS clamp keeping factors strictly positive
    double lambda = 1e-7;  // SNMF l1 penalty weight
};

struct NmfResult {
    Matrix a;  // J x I, nonnegative
    Matrix s;  // I x P, nonnegative
    /// Per-sweep objective: ||X - AS||_F^2, plus lambda*||S||_1 for snmf.
    std::vector<double> objective;
    /// Negative input entries clipped to zero before factorization.
    std::size_t clipped_negatives = 0;
};

/// Hierarchical ALS: exact nonnegative coordinate updates per rank-one factor
/// with max(., eps) clamping. A collapsed factor (vanishing denominator) is
/// reinitialized from the current residual's energy profile.
NmfResult hals(const Matrix& x, std::size_t n_sources, const NmfOptions& opts = {});

/// Sparse NMF via multiplicative updates for ||X - AS||_F^2 + lambda*||S||_1:
///   S <- S .* (2 A^T X) ./ (2 A^T A S + lambda)
///   A <- A .* (X S^T)   ./ (A S S^T)
NmfResult snmf(const Matrix& x, std::size_t n_sources, const NmfOptions& opts = {});

} // namespace sgmca
