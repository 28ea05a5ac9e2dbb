#include "sgmca/separation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgmca/linalg.hpp"

namespace sgmca {

namespace {

double median_inplace(std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("median of empty range");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Linear-interpolation quantile of |values|, used by the warm-up schedule.
double abs_percentile(const std::vector<double>& values, double q) {
    std::vector<double> v(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = std::abs(values[i]);
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double relative_change(const Matrix& current, const Matrix& previous) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < current.rows() * current.cols(); ++i) {
        const double d = current.data()[i] - previous.data()[i];
        num += d * d;
        den += current.data()[i] * current.data()[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

} // namespace

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

IAEPrior::IAEPrior(IAEModel model, ProjectionOptions opts)
    : model_(std::move(model)), opts_(opts), ws_(make_projection_workspace(model_)) {}

namespace {

PriorProjection from_iae(ProjectionResult&& r, double rho_unit_norm) {
    PriorProjection p;
    p.lambda = std::move(r.lambda);
    p.rho = r.rho;
    p.residual = r.residual;
    p.spectrum = std::move(r.projected);
    // ProjectionResult carries rho*g(lambda); the prior reports the
    // unit-amplitude manifold point.
    if (rho_unit_norm != 0.0) {
        for (double& v : p.spectrum) v /= rho_unit_norm;
    }
    return p;
}

} // namespace

PriorProjection IAEPrior::project_fast(std::span<const double> a) const {
    ProjectionResult r = sgmca::project_fast(model_, ws_, a);
    if (r.rho == 0.0) {
        // Amplitude clamped to zero: recover the manifold point directly.
        PriorProjection p;
        p.lambda = r.lambda;
        p.rho = 0.0;
        p.residual = r.residual;
        p.spectrum = generate(model_, r.lambda);
        return p;
    }
    return from_iae(std::move(r), r.rho);
}

PriorProjection IAEPrior::project(std::span<const double> a) const {
    ProjectionResult r = project_manifold(model_, a, opts_);
    if (r.rho == 0.0) {
        PriorProjection p;
        p.lambda = r.lambda;
        p.rho = 0.0;
        p.residual = r.residual;
        p.spectrum = generate(model_, r.lambda);
        return p;
    }
    return from_iae(std::move(r), r.rho);
}

NearestNeighborPrior::NearestNeighborPrior(Matrix dictionary) : dict_(std::move(dictionary)) {
    if (dict_.rows() == 0) throw std::invalid_argument("NearestNeighborPrior: empty dictionary");
    for (std::size_t r = 0; r < dict_.rows(); ++r) {
        if (norm2(dict_.row(r)) == 0.0) {
            throw std::invalid_argument("NearestNeighborPrior: dictionary row " +
                                        std::to_string(r) + " is zero");
        }
    }
}

PriorProjection NearestNeighborPrior::project_fast(std::span<const double> a) const {
    // Exact search: minimizing ||a - rho*d|| over rho >= 0 and rows d is the
    // same as maximizing max(a.d, 0)^2 / ||d||^2.
    double best_gain = -1.0;
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < dict_.rows(); ++r) {
        const double proj = std::max(dot(a, dict_.row(r)), 0.0);
        const double gain = proj * proj / dot(dict_.row(r), dict_.row(r));
        if (gain > best_gain) {
            best_gain = gain;
            best_row = r;
        }
    }
    PriorProjection p;
    const auto d = dict_.row(best_row);
    const double dd = dot(d, d);
    p.rho = std::max(dot(a, d), 0.0) / dd;
    p.spectrum.assign(d.begin(), d.end());
    p.lambda.lambda.assign(dict_.rows(), 0.0);
    p.lambda.lambda[best_row] = 1.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - p.rho * d[i];
        sq += diff * diff;
    }
    p.residual = std::sqrt(sq);
    return p;
}

PriorProjection NearestNeighborPrior::project(std::span<const double> a) const {
    return project_fast(a);  // the nearest neighbor is already exact
}

// ---------------------------------------------------------------------------
// Thresholding blocks
// ---------------------------------------------------------------------------

std::vector<double> estimate_noise_mad(const Matrix& detail_coeffs) {
    if (detail_coeffs.cols() == 0) {
        throw std::invalid_argument("estimate_noise_mad: empty coefficient rows");
    }
    std::vector<double> sigma(detail_coeffs.rows());
    for (std::size_t i = 0; i < detail_coeffs.rows(); ++i) {
        std::vector<double> v(detail_coeffs.row(i).begin(), detail_coeffs.row(i).end());
        const double med = median_inplace(v);
        for (double& x : v) x = std::abs(x - med);
        sigma[i] = median_inplace(v) / 0.6745;
    }
    return sigma;
}

ThresholdPlan compute_thresholds(const StarletCoeffs& coeffs, const std::vector<double>& sigma,
                                 double k_mad, const StarletCoeffs* reweight) {
    const std::size_t n_sources = coeffs.n_images();
    const std::size_t n_pixels = coeffs.coarse.cols();
    if (sigma.size() != n_sources) {
        throw std::invalid_argument("compute_thresholds: " + std::to_string(sigma.size()) +
                                    " sigmas for " + std::to_string(n_sources) + " sources");
    }
    if (reweight && (reweight->n_scales != coeffs.n_scales ||
                     reweight->coarse.rows() != coeffs.coarse.rows() ||
                     reweight->coarse.cols() != coeffs.coarse.cols())) {
        throw std::invalid_argument("compute_thresholds: reweight coefficients shape mismatch");
    }

    ThresholdPlan plan;
    plan.sigma = Matrix(n_sources, coeffs.n_scales);
    for (std::size_t i = 0; i < n_sources; ++i) {
        for (std::size_t s = 0; s < coeffs.n_scales; ++s) plan.sigma(i, s) = sigma[i];
    }
    for (std::size_t s = 0; s < coeffs.n_scales; ++s) {
        Matrix lam(n_sources, n_pixels);
        for (std::size_t i = 0; i < n_sources; ++i) {
            const double base = k_mad * sigma[i];
            for (std::size_t p = 0; p < n_pixels; ++p) {
                double t = base;
                if (reweight && base > 0.0) {
                    t = base / (1.0 + std::abs(reweight->details[s](i, p)) / base);
                }
                lam(i, p) = t;
            }
        }
        plan.lambdas.push_back(std::move(lam));
    }
    return plan;
}

StarletCoeffs soft_threshold(const StarletCoeffs& coeffs, const ThresholdPlan& plan) {
    if (plan.lambdas.size() != coeffs.n_scales) {
        throw std::invalid_argument("soft_threshold: plan has " +
                                    std::to_string(plan.lambdas.size()) + " scales, coeffs " +
                                    std::to_string(coeffs.n_scales));
    }
    StarletCoeffs out = coeffs;
    for (std::size_t s = 0; s < coeffs.n_scales; ++s) {
        const Matrix& lam = plan.lambdas[s];
        Matrix& d = out.details[s];
        if (lam.rows() != d.rows() || lam.cols() != d.cols()) {
            throw std::invalid_argument("soft_threshold: threshold shape mismatch at scale " +
                                        std::to_string(s));
        }
        for (std::size_t i = 0; i < d.rows() * d.cols(); ++i) {
            const double x = d.data()[i];
            const double t = lam.data()[i];
            d.data()[i] = std::copysign(std::max(std::abs(x) - t, 0.0), x);
        }
    }
    return out;
}

std::vector<double> starlet_scale_factors(std::size_t width, std::size_t height,
                                          std::size_t n_scales) {
    Matrix delta(1, width * height);
    delta(0, (height / 2) * width + width / 2) = 1.0;
    const StarletCoeffs c = starlet_forward(delta, width, height, n_scales);
    std::vector<double> factors(n_scales);
    for (std::size_t j = 0; j < n_scales; ++j) {
        factors[j] = norm2(c.details[j].row(0));
        if (factors[j] <= 0.0) {
            throw std::runtime_error("starlet_scale_factors: degenerate scale " +
                                     std::to_string(j));
        }
    }
    return factors;
}

Matrix update_sources(const Matrix& x, const Matrix& a, std::size_t width, std::size_t height,
                      const SourceUpdateOptions& opts, SourceUpdateState& state) {
    Matrix s = pinv(a) * x;
    StarletCoeffs coeffs = starlet_forward(s, width, height, opts.n_scales);
    const std::size_t n_sources = s.rows();
    const std::size_t n_pixels = s.cols();

    // White noise of std sigma contributes factors[j]/factors[0] * sigma_fine
    // to detail scale j, so the MAD estimate from the finest scale propagates
    // to every scale instead of over-shrinking the coarser ones.
    const std::vector<double> factors = starlet_scale_factors(width, height, opts.n_scales);
    const std::vector<double> sigma_fine = estimate_noise_mad(coeffs.details.front());
    state.last_sigma = sigma_fine;

    // The warm-up anchors are the 99th percentiles of the very first source
    // estimate's coefficients, frozen so that later iterations cannot feed an
    // inflating estimate back into its own threshold.
    if (!state.anchors.has_value() && opts.schedule > 0.0) {
        Matrix anchors(n_sources, opts.n_scales);
        for (std::size_t j = 0; j < opts.n_scales; ++j) {
            for (std::size_t i = 0; i < n_sources; ++i) {
                std::vector<double> row(coeffs.details[j].row(i).begin(),
                                        coeffs.details[j].row(i).end());
                anchors(i, j) = abs_percentile(row, 0.99);
            }
        }
        state.anchors = std::move(anchors);
    }

    ThresholdPlan plan;
    plan.sigma = Matrix(n_sources, opts.n_scales);
    Matrix levels(n_sources, opts.n_scales);
    for (std::size_t j = 0; j < opts.n_scales; ++j) {
        Matrix lam(n_sources, n_pixels);
        for (std::size_t i = 0; i < n_sources; ++i) {
            plan.sigma(i, j) = sigma_fine[i] / factors[0] * factors[j];
            const double base = opts.k_mad * plan.sigma(i, j);
            double level = base;
            if (opts.schedule > 0.0 && state.anchors.has_value()) {
                level = base + opts.schedule * std::max((*state.anchors)(i, j) - base, 0.0);
            }
            levels(i, j) = level;
            const bool reweight =
                opts.reweight && state.previous.has_value() && level > 0.0;
            for (std::size_t p = 0; p < n_pixels; ++p) {
                double t = level;
                if (reweight) {
                    t = level / (1.0 + std::abs(state.previous->details[j](i, p)) / level);
                }
                lam(i, p) = t;
            }
        }
        plan.lambdas.push_back(std::move(lam));
    }
    state.last_levels = std::move(levels);

    StarletCoeffs thresholded = soft_threshold(coeffs, plan);
    Matrix out = starlet_inverse(thresholded);
    state.previous = std::move(thresholded);
    return out;
}

std::vector<double> project_unit_ball(std::span<const double> a) {
    std::vector<double> out(a.begin(), a.end());
    const double n = norm2(a);
    if (n > 1.0) {
        for (double& v : out) v /= n;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Identification (greedy spectrum-to-model assignment)
// ---------------------------------------------------------------------------

IdentificationResult identify_spectra(const Matrix& a_bar, const PriorList& models,
                                      double grid_step) {
    const std::size_t n_cols = a_bar.cols();
    const std::size_t n_models = models.size();
    if (n_models > n_cols) {
        throw std::invalid_argument("identify_spectra: " + std::to_string(n_models) +
                                    " models for " + std::to_string(n_cols) + " columns");
    }
    if (grid_step <= 0.0 || grid_step > 1.0) {
        throw std::invalid_argument("identify_spectra: grid_step must lie in (0, 1]");
    }
    for (const auto& m : models) {
        if (m->dim() != a_bar.rows()) {
            throw std::invalid_argument("identify_spectra: model dimension mismatch");
        }
    }

    IdentificationResult res;
    std::vector<bool> col_used(n_cols, false), model_used(n_models, false);
    for (std::size_t i = 0; i < n_cols; ++i) {
        if (norm2(std::span<const double>(a_bar.col(i))) == 0.0) {
            col_used[i] = true;
            res.warnings.push_back("identify_spectra: column " + std::to_string(i) +
                                   " is identically zero; excluded");
        }
    }

    const std::size_t grid_n = static_cast<std::size_t>(std::llround(1.0 / grid_step)) + 1;
    std::vector<std::vector<double>> interference;  // columns appended per pick

    for (std::size_t pick = 0; pick < n_models; ++pick) {
        double best_cost = std::numeric_limits<double>::infinity();
        std::size_t best_col = 0, best_model = 0;
        PriorProjection best_fit;
        bool found = false;

        // mu ranges over the grid {0, grid_step, ..., 1}^(#already-identified),
        // enumerated odometer-style; the first pick sees the single empty mu.
        std::vector<std::size_t> digits(interference.size(), 0);
        while (true) {
            for (std::size_t i = 0; i < n_cols; ++i) {
                if (col_used[i]) continue;
                std::vector<double> r = a_bar.col(i);
                for (std::size_t d = 0; d < digits.size(); ++d) {
                    const double mu = std::min(grid_step * static_cast<double>(digits[d]), 1.0);
                    axpy(-mu, std::span<const double>(interference[d]), std::span<double>(r));
                }
                for (std::size_t m = 0; m < n_models; ++m) {
                    if (model_used[m]) continue;
                    PriorProjection fit = models[m]->project_fast(r);
                    const double cost = fit.residual * fit.residual;
                    if (cost < best_cost) {
                        best_cost = cost;
                        best_col = i;
                        best_model = m;
                        best_fit = std::move(fit);
                        found = true;
                    }
                }
            }
            // advance the odometer
            std::size_t d = 0;
            for (; d < digits.size(); ++d) {
                if (++digits[d] < grid_n) break;
                digits[d] = 0;
            }
            if (d == digits.size() && !digits.empty()) break;
            if (digits.empty()) break;
        }

        if (!found) break;  // every remaining column was degenerate
        col_used[best_col] = true;
        model_used[best_model] = true;
        res.map.modeled_indices.push_back(best_col);
        res.map.model_of[best_col] = best_model;
        std::vector<double> scaled(best_fit.spectrum);
        for (double& v : scaled) v *= best_fit.rho;
        interference.push_back(std::move(scaled));
    }

    res.interference = Matrix(a_bar.rows(), interference.size());
    for (std::size_t c = 0; c < interference.size(); ++c) {
        res.interference.set_col(c, interference[c]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Mixing update
// ---------------------------------------------------------------------------

MixingUpdateResult update_mixing(const Matrix& x, const Matrix& s, const PriorList& models,
                                 const IdentificationMap* ident, double grid_step) {
    Matrix a_bar = x * pinv(s);
    MixingUpdateResult res;
    if (!models.empty()) {
        if (ident) {
            res.ident = *ident;
        } else {
            IdentificationResult id = identify_spectra(a_bar, models, grid_step);
            res.ident = std::move(id.map);
            res.warnings = std::move(id.warnings);
        }
    }

    std::vector<std::ptrdiff_t> col_model(a_bar.cols(), -1);
    for (const auto& [col, model] : res.ident.model_of) {
        col_model[col] = static_cast<std::ptrdiff_t>(model);
    }

    res.a = Matrix(a_bar.rows(), a_bar.cols());
    std::vector<PriorProjection> fits(a_bar.cols());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a_bar.cols());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t c = 0; c < n; ++c) {
        const std::size_t col = static_cast<std::size_t>(c);
        std::vector<double> column = a_bar.col(col);
        if (col_model[col] >= 0) {
            PriorProjection fit =
                models[static_cast<std::size_t>(col_model[col])]->project(column);
            res.a.set_col(col, fit.spectrum);
            // The amplitude is absorbed by the next source update; the stored
            // fit therefore carries rho = 1 so that column == rho * spectrum.
            fit.rho = 1.0;
            fits[col] = std::move(fit);
        } else {
            res.a.set_col(col, project_unit_ball(column));
        }
    }
    for (std::size_t col = 0; col < a_bar.cols(); ++col) {
        if (col_model[col] >= 0) res.column_fits[col] = std::move(fits[col]);
    }
    return res;
}

// ---------------------------------------------------------------------------
// GMCA / sGMCA drivers
// ---------------------------------------------------------------------------

namespace {

void validate_input(const Matrix& x, std::size_t n_sources, const GmcaOptions& opts) {
    if (!x.all_finite()) throw std::invalid_argument("gmca: non-finite input data");
    if (x.max_abs() == 0.0) throw std::invalid_argument("gmca: input data is identically zero");
    if (n_sources == 0 || x.rows() < n_sources) {
        throw std::invalid_argument("gmca: need 1 <= n_sources <= channels, got " +
                                    std::to_string(n_sources) + " sources for " +
                                    std::to_string(x.rows()) + " channels");
    }
    if (opts.width * opts.height != x.cols()) {
        throw std::invalid_argument("gmca: width*height = " +
                                    std::to_string(opts.width * opts.height) +
                                    " but data has " + std::to_string(x.cols()) + " pixels");
    }
}

Matrix initial_mixing(const Matrix& x, std::size_t n_sources, const GmcaOptions& opts) {
    Matrix a(x.rows(), n_sources);
    if (opts.random_init) {
        a = gaussian_matrix(x.rows(), n_sources, opts.seed);
        for (std::size_t c = 0; c < n_sources; ++c) {
            std::vector<double> col = a.col(c);
            const double n = norm2(std::span<const double>(col));
            for (double& v : col) v /= n;
            a.set_col(c, col);
        }
    } else {
        const SvdResult sv = svd(x);
        for (std::size_t c = 0; c < n_sources; ++c) {
            a.set_col(c, sv.u.col(c));
        }
    }
    return a;
}

} // namespace

SeparationResult gmca(const Matrix& x, std::size_t n_sources, const GmcaOptions& opts) {
    validate_input(x, n_sources, opts);

    Matrix a = initial_mixing(x, n_sources, opts);
    Matrix s(n_sources, x.cols());
    SourceUpdateState state;
    SeparationResult res;

    for (std::size_t t = 0; t < opts.iters; ++t) {
        const double schedule =
            opts.iters > 1
                ? 1.0 - static_cast<double>(t) / static_cast<double>(opts.iters - 1)
                : 0.0;
        SourceUpdateOptions so;
        so.n_scales = opts.n_scales;
        so.k_mad = opts.k_mad;
        so.reweight = true;  // no-op on the first pass (no previous coefficients)
        so.schedule = schedule;
        Matrix s_new = update_sources(x, a, opts.width, opts.height, so, state);
        res.history.push_back(relative_change(s_new, s));
        s = std::move(s_new);

        // Warm-up keeps columns exactly unit-norm: the ball projection alone
        // lets them shrink, which the next source update repays with an
        // inflating S and a runaway threshold race.
        Matrix a_bar = x * pinv(s);
        for (std::size_t c = 0; c < n_sources; ++c) {
            std::vector<double> col = a_bar.col(c);
            const double n = norm2(std::span<const double>(col));
            if (n > 0.0) {
                for (double& v : col) v /= n;
            }
            a_bar.set_col(c, col);
        }
        a = std::move(a_bar);
    }

    res.a = std::move(a);
    res.s = std::move(s);
    res.iterations = opts.iters;
    res.stop_reason = SeparationResult::StopReason::max_iters;  // fixed warm-up budget
    return res;
}

SeparationResult sgmca(const Matrix& x, std::size_t n_sources, const PriorList& models,
                       const SgmcaOptions& opts) {
    if (models.size() > n_sources) {
        throw std::invalid_argument("sgmca: more models (" + std::to_string(models.size()) +
                                    ") than sources (" + std::to_string(n_sources) + ")");
    }

    SeparationResult res = gmca(x, n_sources, opts.init);
    res.history.clear();  // keep only refinement iterations

    Matrix a = std::move(res.a);
    Matrix s_prev = std::move(res.s);
    SourceUpdateState state;
    IdentificationMap ident;
    bool have_ident = false;

    res.stop_reason = SeparationResult::StopReason::max_iters;
    res.iterations = opts.max_iters;

    for (std::size_t k = 1; k <= opts.max_iters; ++k) {
        SourceUpdateOptions so;
        so.n_scales = opts.init.n_scales;
        so.k_mad = opts.k_mad;
        so.reweight = opts.reweight;
        Matrix s = update_sources(x, a, opts.init.width, opts.init.height, so, state);
        const double rel = relative_change(s, s_prev);

        const IdentificationMap* reuse =
            (have_ident && !opts.reidentify_each_iter) ? &ident : nullptr;
        MixingUpdateResult mix = update_mixing(x, s, models, reuse, opts.grid_step);
        if (!have_ident || opts.reidentify_each_iter) {
            ident = mix.ident;
            have_ident = true;
            res.warnings.insert(res.warnings.end(), mix.warnings.begin(), mix.warnings.end());
        }
        a = std::move(mix.a);
        res.column_fits = std::move(mix.column_fits);
        s_prev = std::move(s);
        res.history.push_back(rel);

        if (rel <= opts.tol) {
            res.stop_reason = SeparationResult::StopReason::converged;
            res.iterations = k;
            break;
        }
    }

    res.a = std::move(a);
    res.s = std::move(s_prev);
    res.ident = std::move(ident);
    return res;
}

} // namespace sgmca
