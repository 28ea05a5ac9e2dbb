#include "sgmca/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgmca/rng.hpp"

namespace sgmca {

namespace {

struct Prepared {
    Matrix x;
    Matrix a;
    Matrix s;
    std::size_t clipped = 0;
};

// Shared setup: clip negatives, seeded positive init scaled so ||AS|| ~ ||X||.
Prepared prepare(const Matrix& x_in, std::size_t n_sources, const NmfOptions& opts,
                 const char* who) {
    if (n_sources == 0 || x_in.rows() < n_sources) {
        throw std::invalid_argument(std::string(who) + ": need 1 <= n_sources <= channels");
    }
    Prepared p;
    p.x = x_in;
    for (std::size_t i = 0; i < p.x.rows() * p.x.cols(); ++i) {
        if (p.x.data()[i] < 0.0) {
            p.x.data()[i] = 0.0;
            ++p.clipped;
        }
    }
    const double xnorm = p.x.frobenius_norm();
    if (xnorm == 0.0) {
        throw std::invalid_argument(std::string(who) + ": input is identically zero");
    }

    Rng rng(opts.seed);
    p.a = Matrix(p.x.rows(), n_sources);
    p.s = Matrix(n_sources, p.x.cols());
    for (std::size_t i = 0; i < p.a.rows() * p.a.cols(); ++i) {
        p.a.data()[i] = std::abs(rng.gaussian()) + 0.1;
    }
    for (std::size_t i = 0; i < p.s.rows() * p.s.cols(); ++i) {
        p.s.data()[i] = std::abs(rng.gaussian()) + 0.1;
    }
    const double c = std::sqrt(xnorm / (p.a * p.s).frobenius_norm());
    p.a *= c;
    p.s *= c;
    return p;
}

double fit_objective(const Matrix& x, const Matrix& a, const Matrix& s) {
    Matrix r = a * s;
    r -= x;
    const double f = r.frobenius_norm();
    return f * f;
}

double l1_norm(const Matrix& m) {
    double t = 0.0;
    for (std::size_t i = 0; i < m.rows() * m.cols(); ++i) t += std::abs(m.data()[i]);
    return t;
}

} // namespace

NmfResult hals(const Matrix& x_in, std::size_t n_sources, const NmfOptions& opts) {
    Prepared p = prepare(x_in, n_sources, opts, "hals");
    Matrix& a = p.a;
    Matrix& s = p.s;
    const std::size_t n_ch = a.rows(), n_px = s.cols();

    NmfResult res;
    res.clipped_negatives = p.clipped;

    for (std::size_t sweep = 0; sweep < opts.iters; ++sweep) {
        // --- source rows, Gauss-Seidel over i ---
        Matrix ata = a.transpose() * a;
        Matrix atx = a.transpose() * p.x;
        for (std::size_t i = 0; i < n_sources; ++i) {
            const double denom = ata(i, i);
            if (denom <= 1e-12 * ata.max_abs()) {
                // Dead spectrum: rebuild it from the residual's per-channel
                // energy and restart the row at the clamp floor.
                Matrix r = p.x;
                r -= a * s;
                for (std::size_t ch = 0; ch < n_ch; ++ch) {
                    a(ch, i) = std::max(norm2(r.row(ch)), opts.eps);
                }
                const double an = norm2(std::span<const double>(a.col(i)));
                for (std::size_t ch = 0; ch < n_ch; ++ch) a(ch, i) /= an;
                for (std::size_t px = 0; px < n_px; ++px) s(i, px) = opts.eps;
                ata = a.transpose() * a;
                atx = a.transpose() * p.x;
                continue;
            }
            for (std::size_t px = 0; px < n_px; ++px) {
                double numer = atx(i, px);
                for (std::size_t l = 0; l < n_sources; ++l) {
                    if (l != i) numer -= ata(i, l) * s(l, px);
                }
                s(i, px) = std::max(numer / denom, opts.eps);
            }
        }

        // --- mixing columns ---
        Matrix sst = s * s.transpose();
        Matrix xst = p.x * s.transpose();
        for (std::size_t i = 0; i < n_sources; ++i) {
            const double denom = sst(i, i);
            if (denom <= 1e-12 * sst.max_abs()) {
                Matrix r = p.x;
                r -= a * s;
                for (std::size_t px = 0; px < n_px; ++px) {
                    double e = 0.0;
                    for (std::size_t ch = 0; ch < n_ch; ++ch) e += r(ch, px) * r(ch, px);
                    s(i, px) = std::max(std::sqrt(e), opts.eps);
                }
                const double sn = norm2(s.row(i));
                for (std::size_t px = 0; px < n_px; ++px) s(i, px) /= sn;
                for (std::size_t ch = 0; ch < n_ch; ++ch) a(ch, i) = opts.eps;
                sst = s * s.transpose();
                xst = p.x * s.transpose();
                continue;
            }
            for (std::size_t ch = 0; ch < n_ch; ++ch) {
                double numer = xst(ch, i);
                for (std::size_t l = 0; l < n_sources; ++l) {
                    if (l != i) numer -= sst(l, i) * a(ch, l);
                }
                a(ch, i) = std::max(numer / denom, opts.eps);
            }
        }

        res.objective.push_back(fit_objective(p.x, a, s));
    }

    res.a = std::move(a);
    res.s = std::move(s);
    return res;
}

NmfResult snmf(const Matrix& x_in, std::size_t n_sources, const NmfOptions& opts) {
    Prepared p = prepare(x_in, n_sources, opts, "snmf");
    Matrix& a = p.a;
    Matrix& s = p.s;

    NmfResult res;
    res.clipped_negatives = p.clipped;
    constexpr double floor = 1e-300;  // keeps the multiplicative ratios defined

    for (std::size_t sweep = 0; sweep < opts.iters; ++sweep) {
        Matrix num_s = a.transpose() * p.x;
        Matrix den_s = (a.transpose() * a) * s;
        for (std::size_t i = 0; i < s.rows() * s.cols(); ++i) {
            s.data()[i] *= 2.0 * num_s.data()[i] /
                           std::max(2.0 * den_s.data()[i] + opts.lambda, floor);
        }

        Matrix num_a = p.x * s.transpose();
        Matrix den_a = a * (s * s.transpose());
        for (std::size_t i = 0; i < a.rows() * a.cols(); ++i) {
            a.data()[i] *= num_a.data()[i] / std::max(den_a.data()[i], floor);
        }

        res.objective.push_back(fit_objective(p.x, a, s) + opts.lambda * l1_norm(s));
    }

    res.a = std::move(a);
    res.s = std::move(s);
    return res;
}

} // namespace sgmca
