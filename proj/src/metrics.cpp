#include "sgmca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sgmca/linalg.hpp"

namespace sgmca {

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double clamp_db(double num_energy, double den_energy) {
    if (num_energy <= 0.0) return -120.0;
    if (den_energy <= 0.0) return 120.0;
    return std::clamp(10.0 * std::log10(num_energy / den_energy), -120.0, 120.0);
}

double energy(std::span<const double> v) { return dot(v, v); }

} // namespace

AlignedEstimate align(const Matrix& a_est, const Matrix& s_est, const Matrix& a_true,
                      const Matrix& s_true) {
    const std::size_t n = s_true.rows();
    if (s_est.rows() != n || a_est.cols() != n || a_true.cols() != n ||
        s_est.cols() != s_true.cols() || a_est.rows() != a_true.rows()) {
        throw std::invalid_argument("align: shape mismatch between estimate and truth");
    }
    if (n > 9) {
        throw std::invalid_argument("align: exhaustive assignment supports at most 9 sources");
    }

    Matrix corr(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            corr(i, j) = std::abs(pearson(s_est.row(i), s_true.row(j)));
        }
    }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_score = -1.0;
    do {
        double score = 0.0;
        for (std::size_t j = 0; j < n; ++j) score += corr(perm[j], j);
        if (score > best_score) {
            best_score = score;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    AlignedEstimate out;
    out.permutation = best;
    out.scales.resize(n);
    out.a = Matrix(a_est.rows(), n);
    out.s = Matrix(n, s_est.cols());
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = best[j];
        const auto est_row = s_est.row(src);
        const double denom = dot(est_row, est_row);
        double c = denom > 0.0 ? dot(est_row, s_true.row(j)) / denom : 1.0;
        if (c == 0.0) c = 1.0;  // orthogonal match: leave the scale alone
        out.scales[j] = c;
        for (std::size_t p = 0; p < s_est.cols(); ++p) out.s(j, p) = c * s_est(src, p);
        for (std::size_t ch = 0; ch < a_est.rows(); ++ch) out.a(ch, j) = a_est(ch, src) / c;
    }
    return out;
}

double sad(std::span<const double> a_est, std::span<const double> a_true) {
    const double ne = norm2(a_est), nt = norm2(a_true);
    if (ne == 0.0 || nt == 0.0) {
        throw std::invalid_argument("sad: zero spectrum");
    }
    // angle = 2*atan2(||u-v||, ||u+v||) on the normalized vectors: equal to
    // acos of the clamped cosine but exact near 0 and pi, where the acos form
    // loses half the significant digits (equal spectra must hit the cap).
    double diff = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < a_est.size(); ++i) {
        const double u = a_est[i] / ne, v = a_true[i] / nt;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    const double angle =
        std::max(2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum)), 1e-12);
    return -10.0 * std::log10(angle);
}

BssDecomposition bss_eval(std::span<const double> s_est, const Matrix& s_true,
                          std::size_t target_index, const Matrix& n_true) {
    const std::size_t p = s_est.size();
    if (s_true.cols() != p || (n_true.cols() != p && n_true.rows() != 0) ||
        target_index >= s_true.rows()) {
        throw std::invalid_argument("bss_eval: shape mismatch");
    }

    BssDecomposition out;
    const auto target_row = s_true.row(target_index);
    const double tt = dot(target_row, target_row);
    if (tt == 0.0) throw std::invalid_argument("bss_eval: zero target source");

    // (i) projection onto the true source
    const double ct = dot(s_est, target_row) / tt;
    out.target.resize(p);
    for (std::size_t i = 0; i < p; ++i) out.target[i] = ct * target_row[i];

    // Projection of s_est onto the row space of `basis` via the Gram system;
    // rank deficiency drops to the pseudo-inverse.
    auto project_rows = [&](const Matrix& basis) {
        std::vector<double> b(basis.rows());
        Matrix gram(basis.rows(), basis.rows());
        for (std::size_t i = 0; i < basis.rows(); ++i) {
            b[i] = dot(basis.row(i), s_est);
            for (std::size_t j = i; j < basis.rows(); ++j) {
                gram(i, j) = dot(basis.row(i), basis.row(j));
                gram(j, i) = gram(i, j);
            }
        }
        std::vector<double> coef;
        try {
            coef = solve_linear(gram, b);
        } catch (const std::runtime_error&) {
            out.rank_deficient = true;
            Matrix ginv = pinv(gram);
            coef.assign(basis.rows(), 0.0);
            for (std::size_t i = 0; i < basis.rows(); ++i) coef[i] = dot(ginv.row(i), b);
        }
        std::vector<double> proj(p, 0.0);
        for (std::size_t i = 0; i < basis.rows(); ++i) {
            axpy(coef[i], basis.row(i), std::span<double>(proj));
        }
        return proj;
    };

    // (ii) span of all true sources
    std::vector<double> proj_s = project_rows(s_true);
    out.interf.resize(p);
    for (std::size_t i = 0; i < p; ++i) out.interf[i] = proj_s[i] - out.target[i];

    // (iii) that span plus the realized noise rows
    std::vector<double> proj_sn;
    if (n_true.rows() == 0) {
        proj_sn = proj_s;
    } else {
        Matrix stacked(s_true.rows() + n_true.rows(), p);
        for (std::size_t i = 0; i < s_true.rows(); ++i) stacked.set_row(i, s_true.row(i));
        for (std::size_t i = 0; i < n_true.rows(); ++i) {
            stacked.set_row(s_true.rows() + i, n_true.row(i));
        }
        proj_sn = project_rows(stacked);
    }
    out.noise.resize(p);
    out.artif.resize(p);
    for (std::size_t i = 0; i < p; ++i) {
        out.noise[i] = proj_sn[i] - proj_s[i];
        out.artif[i] = s_est[i] - proj_sn[i];
    }

    const double e_t = energy(out.target);
    const double e_i = energy(out.interf);
    const double e_n = energy(out.noise);
    const double e_a = energy(out.artif);
    out.ratios.sdr = clamp_db(e_t, e_i + e_n + e_a);
    out.ratios.sir = clamp_db(e_t, e_i);
    out.ratios.snr = clamp_db(e_t + e_i, e_n);
    out.ratios.sar = clamp_db(e_t + e_i + e_n, e_a);
    return out;
}

EvalReport evaluate(const Matrix& a_est, const Matrix& s_est, const Matrix& a_true,
                    const Matrix& s_true, const Matrix& n_true) {
    AlignedEstimate aligned = align(a_est, s_est, a_true, s_true);
    const std::size_t n = s_true.rows();

    EvalReport rep;
    rep.permutation = aligned.permutation;
    rep.scales = aligned.scales;
    rep.sad_per_spectrum.resize(n);
    rep.sdr.resize(n);
    rep.sir.resize(n);
    rep.snr.resize(n);
    rep.sar.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        rep.sad_per_spectrum[j] = sad(aligned.a.col(j), a_true.col(j));
        const BssDecomposition d = bss_eval(aligned.s.row(j), s_true, j, n_true);
        rep.sdr[j] = d.ratios.sdr;
        rep.sir[j] = d.ratios.sir;
        rep.snr[j] = d.ratios.snr;
        rep.sar[j] = d.ratios.sar;
    }
    rep.sad_overall = std::accumulate(rep.sad_per_spectrum.begin(), rep.sad_per_spectrum.end(),
                                      0.0) / static_cast<double>(n);
    return rep;
}

} // namespace sgmca
