#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "sgmca/iae.hpp"
#include "sgmca/matrix.hpp"
#include "sgmca/starlet.hpp"

namespace sgmca {

// ---------------------------------------------------------------------------
// Spectral priors. A prior owns a manifold of admissible spectra and can
// project an arbitrary vector onto it, either exactly (project) or through a
// cheap surrogate (project_fast) used inside the identification search.
// ---------------------------------------------------------------------------

struct PriorProjection {
    std::vector<double> spectrum;  // unit-amplitude manifold point g(lambda)
    LatentCode lambda;
    double rho = 0.0;       // optimal amplitude against the query
    double residual = 0.0;  // || query - rho * spectrum ||
};

class SpectrumPrior {
public:
    virtual ~SpectrumPrior() = default;
    virtual std::size_t dim() const = 0;
    virtual PriorProjection project_fast(std::span<const double> a) const = 0;
    virtual PriorProjection project(std::span<const double> a) const = 0;
};

/// Learned manifold backed by a trained interpolatory autoencoder.
class IAEPrior final : public SpectrumPrior {
public:
    explicit IAEPrior(IAEModel model, ProjectionOptions opts = {});
    std::size_t dim() const override { return model_.input_dim(); }
    PriorProjection project_fast(std::span<const double> a) const override;
    PriorProjection project(std::span<const double> a) const override;
    const IAEModel& model() const { return model_; }

private:
    IAEModel model_;
    ProjectionOptions opts_;
    ProjectionWorkspace ws_;  // anchor encodings are frozen with the model
};

/// Dictionary prior: the manifold is a finite set of stored spectra and both
/// projections are the exact nearest neighbor under the optimal nonnegative
/// amplitude. Serves as the nearest-neighbor benchmark regularizer and as an
/// exact stand-in for learned models in tests.
class NearestNeighborPrior final : public SpectrumPrior {
public:
    explicit NearestNeighborPrior(Matrix dictionary);  // one spectrum per row
    std::size_t dim() const override { return dict_.cols(); }
    PriorProjection project_fast(std::span<const double> a) const override;
    PriorProjection project(std::span<const double> a) const override;

private:
    Matrix dict_;
};

using PriorList = std::vector<std::shared_ptr<const SpectrumPrior>>;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Per-coefficient thresholds, one (n_sources x n_pixels) matrix per detail
/// scale, plus the per-source/per-scale noise levels they were built from.
struct ThresholdPlan {
    std::vector<Matrix> lambdas;
    Matrix sigma;  // n_sources x n_scales
};

struct IdentificationMap {
    std::vector<std::size_t> modeled_indices;       // columns of A, in selection order
    std::map<std::size_t, std::size_t> model_of;    // column -> model index

    bool empty() const { return modeled_indices.empty(); }
};

struct IdentificationResult {
    IdentificationMap map;
    Matrix interference;  // J x |map|: scaled winning projections, selection order
    std::vector<std::string> warnings;
};

struct SeparationResult {
    Matrix a;  // J x I
    Matrix s;  // I x P
    IdentificationMap ident;
    /// Manifold parameters of each modeled column; the column equals
    /// rho * g(lambda) of its stored fit exactly.
    std::map<std::size_t, PriorProjection> column_fits;
    std::size_t iterations = 0;
    enum class StopReason { converged, max_iters } stop_reason = StopReason::max_iters;
    std::vector<double> history;  // per-iteration relative change of S
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// MAD noise estimate per row: median(|c - median(c)|) / 0.6745.
std::vector<double> estimate_noise_mad(const Matrix& detail_coeffs);

/// Base threshold k_mad * sigma_i on every detail scale; when the previous
/// iterate's coefficients are supplied, each entry is reweighted to
/// base / (1 + |prev| / base).
ThresholdPlan compute_thresholds(const StarletCoeffs& coeffs, const std::vector<double>& sigma,
                                 double k_mad = 3.0, const StarletCoeffs* reweight = nullptr);

/// Entrywise soft-thresholding of the detail scales; the coarse scale passes
/// through untouched.
StarletCoeffs soft_threshold(const StarletCoeffs& coeffs, const ThresholdPlan& plan);

struct SourceUpdateOptions {
    std::size_t n_scales = 3;
    double k_mad = 3.0;
    bool reweight = true;
    /// Warm-up schedule in [0,1]: blends the per-scale threshold level from
    /// the k_mad*sigma floor (0) toward the 99th percentile of the first
    /// iteration's coefficients (1), which the state keeps frozen.
    double schedule = 0.0;
};

/// Carries the previous thresholded coefficients between iterations (for the
/// reweighting scheme), pins the warm-up percentile anchors to the first
/// iteration (so thresholds cannot chase their own feedback), and exposes the
/// latest noise estimates.
struct SourceUpdateState {
    std::optional<StarletCoeffs> previous;
    std::optional<Matrix> anchors;    // n_sources x n_scales, 99th percentiles
    std::vector<double> last_sigma;   // per source, finest-scale estimate
    Matrix last_levels;               // n_sources x n_scales effective levels
};

/// White-noise amplification of each detail scale (the l2 norm of the
/// equivalent wavelet filter), measured on a centred impulse.
std::vector<double> starlet_scale_factors(std::size_t width, std::size_t height,
                                          std::size_t n_scales);

/// One source step: S <- A+ X, then soft-thresholding in the starlet domain.
Matrix update_sources(const Matrix& x, const Matrix& a, std::size_t width, std::size_t height,
                      const SourceUpdateOptions& opts, SourceUpdateState& state);

/// a / max(1, ||a||).
std::vector<double> project_unit_ball(std::span<const double> a);

/// Greedy spectrum-to-model assignment: at step k, over unused columns i,
/// unused models m and interference weights mu on {0, 0.1, ..., 1}^(k-1),
/// minimize || A_:i - M mu - rho * P_m(A_:i - M mu) ||^2 using the fast
/// projection; the winning scaled projection becomes a new column of the
/// interference matrix M. All-zero columns are skipped with a warning.
IdentificationResult identify_spectra(const Matrix& a_bar, const PriorList& models,
                                      double grid_step = 0.1);

struct MixingUpdateResult {
    Matrix a;
    IdentificationMap ident;
    std::map<std::size_t, PriorProjection> column_fits;
    std::vector<std::string> warnings;
};

/// One mixing step: A <- X S+, identification (run when `ident` is null,
/// reused otherwise), manifold projection of identified columns and unit-ball
/// projection of the rest.
MixingUpdateResult update_mixing(const Matrix& x, const Matrix& s, const PriorList& models,
                                 const IdentificationMap* ident, double grid_step = 0.1);

// ---------------------------------------------------------------------------
// Full algorithms
// ---------------------------------------------------------------------------

struct GmcaOptions {
    std::size_t width = 0;   // spatial shape of each source row (width*height = P)
    std::size_t height = 0;
    std::size_t n_scales = 3;
    std::size_t iters = 100;  // warm-up length of the decaying threshold schedule
    double k_mad = 3.0;
    bool random_init = false;  // seeded Gaussian columns instead of SVD init
    std::uint64_t seed = 0;
};

/// Sparsity-driven projected ALS: alternates thresholded source updates (with
/// the threshold level decaying linearly from the 99th percentile to the
/// k_mad*sigma floor over the warm-up) with least-squares + unit-ball mixing
/// updates. Deterministic given the seed.
SeparationResult gmca(const Matrix& x, std::size_t n_sources, const GmcaOptions& opts);

struct SgmcaOptions {
    GmcaOptions init;  // warm-up used for initialization
    std::size_t max_iters = 50;
    double tol = 1e-6;
    double k_mad = 3.0;
    bool reweight = true;
    double grid_step = 0.1;
    /// Identification normally runs once, at the first iteration; set to
    /// re-run it on every mixing update.
    bool reidentify_each_iter = false;
};

/// Semi-blind GMCA: GMCA initialization, then projected ALS refinement where
/// identified mixing columns are constrained to their model manifolds and the
/// rest to the unit ball. Stops when the relative change of S drops to `tol`
/// or after `max_iters` refinement iterations.
SeparationResult sgmca(const Matrix& x, std::size_t n_sources, const PriorList& models,
                       const SgmcaOptions& opts);

} // namespace sgmca
