#pragma once

#include <cstdint>
#include <string>

#include "sgmca/matrix.hpp"

namespace sgmca {

/// Known on-manifold samples (one spectrum per row) whose encodings span the
/// latent affine set.
struct AnchorSet {
    Matrix anchors;  // N x J
};

/// Validates N >= 2 and pairwise non-collinearity (angle > 1e-6 rad).
AnchorSet make_anchor_set(Matrix anchors);

struct DenseLayer {
    Matrix weight;             // J x J (constant-width design)
    std::vector<double> bias;  // J
};

/// Interpolatory autoencoder: encoder/decoder stacks of fully connected
/// tanh layers with a scalar skip connection, y <- tanh(W y + b) + skip * y.
/// Latent codes are affine (sum-to-one) combinations of the encoded anchors.
struct IAEModel {
    Matrix anchors;  // N x J
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;
    double skip = 0.1;

    std::size_t input_dim() const { return anchors.cols(); }
    std::size_t latent_dim() const { return anchors.cols(); }
    std::size_t n_anchors() const { return anchors.rows(); }
};

/// Barycentric weights; entries sum to one within 1e-9.
struct LatentCode {
    std::vector<double> lambda;
};

struct ProjectionResult {
    LatentCode lambda;
    double rho = 0.0;
    std::vector<double> projected;  // rho * g(lambda)
    double residual = 0.0;          // ||a - projected||
    bool used_fallback = false;     // fast path fell back to the exact affine solve
    bool converged = true;          // iterative path reached stationarity before the cap
};

struct IAETrainConfig {
    std::size_t epochs = 1000;
    std::size_t batch_size = 25;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    double validation_fraction = 0.25;
    std::size_t n_layers = 4;
    /// Ablation switch: treat the barycentric weights as constants in the
    /// backward pass instead of differentiating through the closed-form solve.
    bool stop_gradient_lambda = false;
};

struct IAETrainResult {
    IAEModel model;
    std::vector<double> train_loss;  // per-epoch mean squared reconstruction error
    std::vector<double> val_loss;    // empty when no validation split
};

std::vector<double> encode(const IAEModel& model, std::span<const double> x);
std::vector<double> decode(const IAEModel& model, std::span<const double> code);

/// Columns are the encoded anchors phi(alpha_n); shape J' x N.
Matrix encoded_anchors(const IAEModel& model);

/// Closed-form solution of min_lambda ||code - Phi*lambda||^2 s.t. sum(lambda)=1
/// via the KKT linear system. Throws std::runtime_error if the system is singular.
LatentCode barycentric_weights(const IAEModel& model, std::span<const double> code);

/// Generator g(lambda) = decode(Phi * lambda).
std::vector<double> generate(const IAEModel& model, const LatentCode& code);

/// Adam training of the interpolatory reconstruction objective. Weights are
/// seeded-Gaussian initialized; batches are shuffled with the same generator,
/// so identical (dataset, anchors, config) give bit-identical models.
/// Throws std::runtime_error (reporting the epoch) if the loss turns NaN.
IAETrainResult train_iae(const Matrix& dataset, const AnchorSet& anchors,
                         const IAETrainConfig& config);

/// Surrogate projection: one encoder pass, projected least squares in the
/// latent space with the sum-to-one constraint approximated by rescaling,
/// then the optimal nonnegative amplitude rho.
ProjectionResult project_fast(const IAEModel& model, std::span<const double> a);

/// Anchor-dependent quantities precomputed once per frozen model; the
/// workspace overload of project_fast avoids re-deriving them on every call
/// (the identification search makes thousands of such calls).
struct ProjectionWorkspace {
    Matrix phi;       // encoded anchors, J' x N
    Matrix phi_pinv;  // N x J'
    Matrix kkt;       // bordered Gram system of the affine solve
};
ProjectionWorkspace make_projection_workspace(const IAEModel& model);
ProjectionResult project_fast(const IAEModel& model, const ProjectionWorkspace& ws,
                              std::span<const double> a);

struct ProjectionOptions {
    std::size_t max_iters = 1000;
    double lr = 0.01;
    /// Stationarity: stop once the best residual improved by less than
    /// tol * max(1, best) over the last `patience` iterations.
    double tol = 1e-12;
    std::size_t patience = 50;
    /// Optional per-iteration best-residual trace (for diagnostics/tests).
    std::vector<double>* residual_trace = nullptr;
};

/// Iterative manifold projection: Adam descent on (lambda_free, rho) with the
/// last latent entry set to one minus the sum of the others and rho clamped
/// nonnegative, initialized from project_fast. Returns the best iterate; its
/// residual never exceeds the fast projection's.
ProjectionResult project_manifold(const IAEModel& model, std::span<const double> a,
                                  const ProjectionOptions& opts = {});

// Exposed for gradient verification: value and analytic gradient of the
// projection objective ||a - rho*g([v; 1-sum(v)])||^2.
double projection_objective(const IAEModel& model, std::span<const double> a,
                            std::span<const double> v, double rho);
void projection_gradient(const IAEModel& model, std::span<const double> a,
                         std::span<const double> v, double rho, std::span<double> grad_v,
                         double& grad_rho);

// Training objective over a batch (mean per-sample squared error) and its
// analytic gradients; train_iae uses the same code path.
struct IAEGradients {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;
};
double iae_batch_loss(const IAEModel& model, const Matrix& batch);
IAEGradients iae_batch_gradients(const IAEModel& model, const Matrix& batch,
                                 bool stop_gradient_lambda = false);

/// Writes <json_path> plus a raw little-endian float64 weight blob next to it
/// (same stem, ".weights.bin"); the JSON carries dims, skip, anchors and the
/// blob's layout. load_model inverts it bit-exactly.
void save_model(const IAEModel& model, const std::string& json_path);
IAEModel load_model(const std::string& json_path);

/// Convenience anchor suggestion: farthest-point sampling over dataset rows.
std::vector<std::size_t> farthest_point_anchors(const Matrix& dataset, std::size_t n);

} // namespace sgmca
