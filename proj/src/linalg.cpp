#include "sgmca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sgmca {

namespace {

// One-sided Jacobi on a tall matrix (rows >= cols): rotates column pairs of a
// working copy until all pairs are numerically orthogonal, accumulating the
// rotations in v. Column norms then give the singular values.
struct JacobiResult {
    Matrix b;  // rotated columns, b = input * v
    Matrix v;  // n x n orthogonal
};

JacobiResult one_sided_jacobi(const Matrix& input, std::size_t max_sweeps) {
    const std::size_t m = input.rows(), n = input.cols();
    Matrix b = input;
    Matrix v = Matrix::identity(n);
    const double tol = 1e-15;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = c * bp - s * bq;
                    b(i, q) = s * bp + c * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (!rotated) return {std::move(b), std::move(v)};
    }
    throw std::runtime_error("svd: Jacobi sweeps did not converge for " + std::to_string(m) +
                             "x" + std::to_string(n) + " matrix");
}

// Deterministic completion of U's null-space columns: orthonormalize the
// standard basis candidate with the largest residual against the columns
// gathered so far.
void complete_column(Matrix& u, std::size_t col) {
    const std::size_t m = u.rows();
    std::vector<double> best;
    double best_norm = 0.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
        std::vector<double> e(m, 0.0);
        e[cand] = 1.0;
        for (std::size_t j = 0; j < col; ++j) {
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += e[i] * u(i, j);
            for (std::size_t i = 0; i < m; ++i) e[i] -= proj * u(i, j);
        }
        const double nrm = norm2(e);
        if (nrm > best_norm) {
            best_norm = nrm;
            best = std::move(e);
        }
    }
    if (best_norm < 1e-8) throw std::runtime_error("svd: failed to complete orthonormal basis");
    for (std::size_t i = 0; i < m; ++i) u(i, col) = best[i] / best_norm;
}

SvdResult svd_tall(const Matrix& input, std::size_t max_sweeps) {
    const std::size_t m = input.rows(), n = input.cols();
    auto [b, v] = one_sided_jacobi(input, max_sweeps);

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        auto cj = b.col(j);
        sigma[j] = norm2(cj);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return sigma[a] > sigma[c]; });

    Matrix u(m, n), vt(n, n);
    std::vector<double> s(n);
    const double tiny = std::numeric_limits<double>::min();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        s[j] = sigma[src];
        if (s[j] > tiny) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = b(i, src) / s[j];
        } else {
            s[j] = 0.0;
            complete_column(u, j);
        }
        for (std::size_t i = 0; i < n; ++i) vt(j, i) = v(i, src);
    }

    // Sign convention: make the largest-magnitude entry of each u column
    // positive, flipping the matching vt row, so results are reproducible.
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = std::abs(u(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < m; ++i) u(i, j) = -u(i, j);
            for (std::size_t i = 0; i < n; ++i) vt(j, i) = -vt(j, i);
        }
    }
    return {std::move(u), std::move(s), std::move(vt)};
}

} // namespace

SvdResult svd(const Matrix& m, std::size_t max_sweeps) {
    if (m.empty()) throw std::invalid_argument("svd: empty matrix");
    if (!m.all_finite()) throw std::invalid_argument("svd: non-finite entries");
    if (m.rows() >= m.cols()) return svd_tall(m, max_sweeps);
    // Wide input: decompose the transpose and swap factors.
    SvdResult t = svd_tall(m.transpose(), max_sweeps);
    SvdResult r;
    r.u = t.vt.transpose();
    r.singular_values = std::move(t.singular_values);
    r.vt = t.u.transpose();
    return r;
}

Matrix pinv(const Matrix& m, double rcond) {
    if (rcond <= 0.0 || rcond >= 1.0) throw std::invalid_argument("pinv: rcond must be in (0,1)");
    SvdResult d = svd(m);
    const double cutoff = rcond * (d.singular_values.empty() ? 0.0 : d.singular_values[0]);
    const std::size_t k = d.singular_values.size();
    // pinv = v * diag(1/s) * u^T
    Matrix vs(m.cols(), k);
    for (std::size_t j = 0; j < k; ++j) {
        const double inv = d.singular_values[j] > cutoff ? 1.0 / d.singular_values[j] : 0.0;
        for (std::size_t i = 0; i < m.cols(); ++i) vs(i, j) = d.vt(j, i) * inv;
    }
    return vs * d.u.transpose();
}

std::vector<double> solve_linear(const Matrix& a, std::span<const double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_linear: shape mismatch");
    Matrix lu = a;
    std::vector<double> x(b.begin(), b.end());
    std::vector<std::size_t> piv(n);
    std::iota(piv.begin(), piv.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
        if (std::abs(lu(p, k)) < 1e-300) throw std::runtime_error("solve_linear: singular system");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(p, j), lu(k, j));
            std::swap(x[p], x[k]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            lu(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            x[i] -= f * x[k];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
        x[i] /= lu(i, i);
    }
    return x;
}

} // namespace sgmca
