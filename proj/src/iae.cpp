#include "sgmca/iae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "sgmca/linalg.hpp"
#include "sgmca/rng.hpp"

namespace sgmca {

namespace {

// ---------------------------------------------------------------------------
// MLP forward/backward. Every layer maps J -> J:  y <- tanh(W y + b) + skip*y.
// The cache keeps each layer input and tanh output so the backward pass can
// form  dL/dy_l = (1 - t^2) .* dz  contributions without recomputation.
// ---------------------------------------------------------------------------

struct MlpCache {
    std::vector<std::vector<double>> inputs;  // per layer, size J
    std::vector<std::vector<double>> tanhs;   // per layer, size J
};

std::vector<double> forward_mlp(const std::vector<DenseLayer>& layers, double skip,
                                std::span<const double> x, MlpCache* cache) {
    std::vector<double> y(x.begin(), x.end());
    if (cache) {
        cache->inputs.clear();
        cache->tanhs.clear();
    }
    for (const DenseLayer& layer : layers) {
        const std::size_t dim = layer.bias.size();
        std::vector<double> z(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            z[i] = layer.bias[i] + dot(layer.weight.row(i), y);
        }
        for (double& v : z) v = std::tanh(v);
        if (cache) {
            cache->inputs.push_back(y);
            cache->tanhs.push_back(z);
        }
        for (std::size_t i = 0; i < dim; ++i) z[i] += skip * y[i];
        y = std::move(z);
    }
    return y;
}

// Backpropagates dout through the stack. Parameter gradients are accumulated
// into *grads when non-null; the gradient w.r.t. the stack input is returned.
std::vector<double> backward_mlp(const std::vector<DenseLayer>& layers, double skip,
                                 const MlpCache& cache, std::span<const double> dout,
                                 std::vector<DenseLayer>* grads) {
    std::vector<double> dy(dout.begin(), dout.end());
    for (std::size_t l = layers.size(); l-- > 0;) {
        const DenseLayer& layer = layers[l];
        const std::vector<double>& t = cache.tanhs[l];
        const std::vector<double>& in = cache.inputs[l];
        const std::size_t dim = layer.bias.size();
        // dz_i = dy_i * (1 - tanh^2); the skip path adds skip*dy directly to din.
        std::vector<double> dz(dim);
        for (std::size_t i = 0; i < dim; ++i) dz[i] = dy[i] * (1.0 - t[i] * t[i]);
        if (grads) {
            DenseLayer& g = (*grads)[l];
            for (std::size_t i = 0; i < dim; ++i) {
                g.bias[i] += dz[i];
                axpy(dz[i], std::span<const double>(in), g.weight.row(i));
            }
        }
        std::vector<double> din(dim);
        for (std::size_t i = 0; i < dim; ++i) din[i] = skip * dy[i];
        for (std::size_t i = 0; i < dim; ++i) {
            axpy(dz[i], layer.weight.row(i), std::span<double>(din));
        }
        dy = std::move(din);
    }
    return dy;
}

std::vector<DenseLayer> zero_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> out;
    out.reserve(layers.size());
    for (const DenseLayer& layer : layers) {
        out.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                       std::vector<double>(layer.bias.size(), 0.0)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constrained latent solve. K is the bordered Gram system
//   [ Phi^T Phi  1 ] [lambda]   [Phi^T e]
//   [    1^T    0 ] [  nu  ] = [   1   ]
// Reused verbatim for the backward pass (K is symmetric).
// ---------------------------------------------------------------------------

Matrix kkt_matrix(const Matrix& phi) {
    const std::size_t n = phi.cols();
    Matrix k(n + 1, n + 1);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            double g = 0.0;
            for (std::size_t r = 0; r < phi.rows(); ++r) g += phi(r, a) * phi(r, b);
            k(a, b) = g;
        }
        k(a, n) = 1.0;
        k(n, a) = 1.0;
    }
    return k;
}

std::vector<double> solve_barycentric(const Matrix& kkt, const Matrix& phi,
                                      std::span<const double> code) {
    const std::size_t n = phi.cols();
    std::vector<double> rhs(n + 1, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t r = 0; r < phi.rows(); ++r) rhs[a] += phi(r, a) * code[r];
    }
    rhs[n] = 1.0;
    std::vector<double> u;
    try {
        u = solve_linear(kkt, rhs);
    } catch (const std::runtime_error&) {
        throw std::runtime_error(
            "barycentric_weights: singular anchor system (encoded anchors are affinely "
            "dependent)");
    }
    u.resize(n);  // drop the multiplier
    return u;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    std::vector<double> y(m.rows(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
    return y;
}

std::vector<double> matvec_t(const Matrix& m, std::span<const double> x) {
    std::vector<double> y(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) axpy(x[r], m.row(r), std::span<double>(y));
    return y;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads, double lr) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

// Flattened views over all layer parameters so one AdamState covers the model.
std::vector<double*> param_blocks(std::vector<DenseLayer>& layers, std::vector<std::size_t>& sizes) {
    std::vector<double*> ptrs;
    for (DenseLayer& layer : layers) {
        ptrs.push_back(layer.weight.data());
        sizes.push_back(layer.weight.rows() * layer.weight.cols());
        ptrs.push_back(layer.bias.data());
        sizes.push_back(layer.bias.size());
    }
    return ptrs;
}

// ---------------------------------------------------------------------------
// Shared forward pass of the interpolatory objective for one sample.
// ---------------------------------------------------------------------------

struct SamplePass {
    MlpCache enc_cache;
    MlpCache dec_cache;
    std::vector<double> code;    // phi(x)
    std::vector<double> lambda;  // barycentric weights
    std::vector<double> recon;   // psi(Phi * lambda)
    double sq_err = 0.0;
};

SamplePass run_sample(const IAEModel& model, const Matrix& phi, const Matrix& kkt,
                      std::span<const double> x) {
    SamplePass pass;
    pass.code = forward_mlp(model.encoder, model.skip, x, &pass.enc_cache);
    pass.lambda = solve_barycentric(kkt, phi, pass.code);
    std::vector<double> bary = matvec(phi, pass.lambda);
    pass.recon = forward_mlp(model.decoder, model.skip, bary, &pass.dec_cache);
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - pass.recon[j];
        pass.sq_err += d * d;
    }
    return pass;
}

} // namespace

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

AnchorSet make_anchor_set(Matrix anchors) {
    if (anchors.rows() < 2) {
        throw std::invalid_argument("make_anchor_set: need at least 2 anchors, got " +
                                    std::to_string(anchors.rows()));
    }
    for (std::size_t i = 0; i < anchors.rows(); ++i) {
        for (std::size_t j = i + 1; j < anchors.rows(); ++j) {
            const double ni = norm2(anchors.row(i));
            const double nj = norm2(anchors.row(j));
            if (ni == 0.0 || nj == 0.0) {
                throw std::invalid_argument("make_anchor_set: anchor " +
                                            std::to_string(ni == 0.0 ? i : j) + " is zero");
            }
            const double c = std::clamp(std::abs(dot(anchors.row(i), anchors.row(j))) / (ni * nj),
                                        -1.0, 1.0);
            if (std::acos(c) <= 1e-6) {
                throw std::invalid_argument("make_anchor_set: anchors " + std::to_string(i) +
                                            " and " + std::to_string(j) + " are collinear");
            }
        }
    }
    return AnchorSet{std::move(anchors)};
}

std::vector<double> encode(const IAEModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("encode: expected " + std::to_string(model.input_dim()) +
                                    " channels, got " + std::to_string(x.size()));
    }
    return forward_mlp(model.encoder, model.skip, x, nullptr);
}

std::vector<double> decode(const IAEModel& model, std::span<const double> code) {
    if (code.size() != model.latent_dim()) {
        throw std::invalid_argument("decode: expected " + std::to_string(model.latent_dim()) +
                                    " latent entries, got " + std::to_string(code.size()));
    }
    return forward_mlp(model.decoder, model.skip, code, nullptr);
}

Matrix encoded_anchors(const IAEModel& model) {
    Matrix phi(model.latent_dim(), model.n_anchors());
    for (std::size_t n = 0; n < model.n_anchors(); ++n) {
        std::vector<double> col = forward_mlp(model.encoder, model.skip, model.anchors.row(n),
                                              nullptr);
        phi.set_col(n, col);
    }
    return phi;
}

LatentCode barycentric_weights(const IAEModel& model, std::span<const double> code) {
    const Matrix phi = encoded_anchors(model);
    return LatentCode{solve_barycentric(kkt_matrix(phi), phi, code)};
}

std::vector<double> generate(const IAEModel& model, const LatentCode& code) {
    if (code.lambda.size() != model.n_anchors()) {
        throw std::invalid_argument("generate: expected " + std::to_string(model.n_anchors()) +
                                    " weights, got " + std::to_string(code.lambda.size()));
    }
    const Matrix phi = encoded_anchors(model);
    std::vector<double> bary = matvec(phi, code.lambda);
    return forward_mlp(model.decoder, model.skip, bary, nullptr);
}

double iae_batch_loss(const IAEModel& model, const Matrix& batch) {
    const Matrix phi = encoded_anchors(model);
    const Matrix kkt = kkt_matrix(phi);
    double loss = 0.0;
    for (std::size_t s = 0; s < batch.rows(); ++s) {
        loss += run_sample(model, phi, kkt, batch.row(s)).sq_err;
    }
    return loss / static_cast<double>(batch.rows());
}

IAEGradients iae_batch_gradients(const IAEModel& model, const Matrix& batch,
                                 bool stop_gradient_lambda) {
    const std::size_t n = model.n_anchors();
    const Matrix phi = encoded_anchors(model);
    const Matrix kkt = kkt_matrix(phi);

    // Anchor encodings are shared by every sample, so their caches are built
    // once and dPhi is accumulated across the batch before backpropagating.
    std::vector<MlpCache> anchor_caches(n);
    for (std::size_t a = 0; a < n; ++a) {
        forward_mlp(model.encoder, model.skip, model.anchors.row(a), &anchor_caches[a]);
    }

    IAEGradients grads{zero_like(model.encoder), zero_like(model.decoder)};
    Matrix dphi(phi.rows(), phi.cols());
    const double inv_batch = 1.0 / static_cast<double>(batch.rows());

    for (std::size_t s = 0; s < batch.rows(); ++s) {
        const auto x = batch.row(s);
        SamplePass pass = run_sample(model, phi, kkt, x);

        std::vector<double> drecon(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            drecon[j] = 2.0 * (pass.recon[j] - x[j]) * inv_batch;
        }
        std::vector<double> dbary = backward_mlp(model.decoder, model.skip, pass.dec_cache,
                                                 drecon, &grads.decoder);

        // Barycenter B = Phi * lambda contributes to both factors.
        std::vector<double> dlambda = matvec_t(phi, dbary);
        for (std::size_t r = 0; r < phi.rows(); ++r) {
            for (std::size_t a = 0; a < n; ++a) dphi(r, a) += dbary[r] * pass.lambda[a];
        }

        if (!stop_gradient_lambda) {
            // Implicit differentiation of the bordered system K u = c:
            // with w = K^{-1} [dlambda; 0],
            //   d(Phi^T e) = w_l,   dK = -w u^T  restricted to the Gram block,
            // which expands to the three rank-one updates below.
            std::vector<double> rhs(n + 1, 0.0);
            std::copy(dlambda.begin(), dlambda.end(), rhs.begin());
            std::vector<double> w = solve_linear(kkt, rhs);
            w.resize(n);
            std::vector<double> phi_w = matvec(phi, w);
            std::vector<double> phi_l = matvec(phi, pass.lambda);
            for (std::size_t r = 0; r < phi.rows(); ++r) {
                for (std::size_t a = 0; a < n; ++a) {
                    dphi(r, a) += pass.code[r] * w[a] - phi_l[r] * w[a] - phi_w[r] * pass.lambda[a];
                }
            }
            backward_mlp(model.encoder, model.skip, pass.enc_cache, phi_w, &grads.encoder);
        }
    }

    for (std::size_t a = 0; a < n; ++a) {
        std::vector<double> dcol(phi.rows());
        for (std::size_t r = 0; r < phi.rows(); ++r) dcol[r] = dphi(r, a);
        backward_mlp(model.encoder, model.skip, anchor_caches[a], dcol, &grads.encoder);
    }
    return grads;
}

IAETrainResult train_iae(const Matrix& dataset, const AnchorSet& anchors,
                         const IAETrainConfig& config) {
    const std::size_t j = dataset.cols();
    if (anchors.anchors.cols() != j) {
        throw std::invalid_argument("train_iae: anchors have " +
                                    std::to_string(anchors.anchors.cols()) +
                                    " channels but dataset has " + std::to_string(j));
    }
    if (dataset.rows() < config.batch_size || config.batch_size == 0) {
        throw std::invalid_argument("train_iae: dataset rows (" + std::to_string(dataset.rows()) +
                                    ") must be >= batch_size (" +
                                    std::to_string(config.batch_size) + ")");
    }
    if (config.n_layers == 0 || config.epochs == 0) {
        throw std::invalid_argument("train_iae: n_layers and epochs must be positive");
    }

    Rng rng(config.seed);
    IAEModel model;
    model.anchors = anchors.anchors;
    model.skip = 0.1;
    const double w_std = 1.0 / std::sqrt(static_cast<double>(j));
    auto init_stack = [&](std::vector<DenseLayer>& stack) {
        for (std::size_t l = 0; l < config.n_layers; ++l) {
            DenseLayer layer{Matrix(j, j), std::vector<double>(j, 0.0)};
            for (std::size_t q = 0; q < j * j; ++q) layer.weight.data()[q] = w_std * rng.gaussian();
            stack.push_back(std::move(layer));
        }
    };
    init_stack(model.encoder);
    init_stack(model.decoder);

    // Deterministic train/validation split on a shuffled index set; the split
    // never shrinks the training side below one full batch.
    std::vector<std::size_t> order(dataset.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i-- > 1;) {
        std::swap(order[i], order[rng.below(i + 1)]);
    }
    std::size_t n_val = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(dataset.rows())));
    n_val = std::min(n_val, dataset.rows() - config.batch_size);
    const std::size_t n_train = dataset.rows() - n_val;

    Matrix val(n_val == 0 ? 1 : n_val, j);
    for (std::size_t i = 0; i < n_val; ++i) val.set_row(i, dataset.row(order[n_train + i]));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);

    std::vector<std::size_t> sizes;
    std::vector<double*> ptrs = param_blocks(model.encoder, sizes);
    {
        std::vector<double*> dec_ptrs = param_blocks(model.decoder, sizes);
        ptrs.insert(ptrs.end(), dec_ptrs.begin(), dec_ptrs.end());
    }
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    AdamState adam(total);
    std::vector<double> flat_params(total), flat_grads(total);

    // Parameters live in the layers; the optimizer sees one flat vector.
    auto gather = [&](std::vector<double>& flat, auto source_ptr) {
        std::size_t off = 0;
        for (std::size_t b = 0; b < ptrs.size(); ++b) {
            std::memcpy(flat.data() + off, source_ptr(b), sizes[b] * sizeof(double));
            off += sizes[b];
        }
    };
    auto scatter_params = [&]() {
        std::size_t off = 0;
        for (std::size_t b = 0; b < ptrs.size(); ++b) {
            std::memcpy(ptrs[b], flat_params.data() + off, sizes[b] * sizeof(double));
            off += sizes[b];
        }
    };

    IAETrainResult result;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = train_idx.size(); i-- > 1;) {
            std::swap(train_idx[i], train_idx[rng.below(i + 1)]);
        }
        double epoch_sq = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t count = std::min(config.batch_size, n_train - start);
            Matrix batch(count, j);
            for (std::size_t i = 0; i < count; ++i) {
                batch.set_row(i, dataset.row(train_idx[start + i]));
            }
            const double batch_loss = iae_batch_loss(model, batch);
            epoch_sq += batch_loss * static_cast<double>(count);
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train_iae: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch));
            }
            IAEGradients grads = iae_batch_gradients(model, batch, config.stop_gradient_lambda);

            std::vector<std::size_t> gsizes;
            std::vector<double*> gptrs = param_blocks(grads.encoder, gsizes);
            {
                std::vector<double*> gdec = param_blocks(grads.decoder, gsizes);
                gptrs.insert(gptrs.end(), gdec.begin(), gdec.end());
            }
            gather(flat_params, [&](std::size_t b) { return ptrs[b]; });
            gather(flat_grads, [&](std::size_t b) { return gptrs[b]; });
            adam.step(flat_params, flat_grads, config.learning_rate);
            scatter_params();
        }
        result.train_loss.push_back(epoch_sq / static_cast<double>(n_train));
        if (n_val > 0) {
            result.val_loss.push_back(iae_batch_loss(model, val));
        }
    }
    result.model = std::move(model);
    return result;
}

ProjectionWorkspace make_projection_workspace(const IAEModel& model) {
    ProjectionWorkspace ws;
    ws.phi = encoded_anchors(model);
    ws.phi_pinv = pinv(ws.phi);
    ws.kkt = kkt_matrix(ws.phi);
    return ws;
}

ProjectionResult project_fast(const IAEModel& model, std::span<const double> a) {
    return project_fast(model, make_projection_workspace(model), a);
}

ProjectionResult project_fast(const IAEModel& model, const ProjectionWorkspace& ws,
                              std::span<const double> a) {
    const Matrix& phi = ws.phi;
    std::vector<double> code = forward_mlp(model.encoder, model.skip, a, nullptr);

    ProjectionResult res;
    std::vector<double> lambda = matvec(ws.phi_pinv, code);
    double sum = 0.0;
    for (double v : lambda) sum += v;
    if (sum <= 1e-9) {
        // A non-positive (or numerically zero) sum means rescaling would flip
        // or blow up every component; fall back to the exact affine solve.
        lambda = solve_barycentric(ws.kkt, phi, code);
        res.used_fallback = true;
    } else {
        for (double& v : lambda) v /= sum;
    }

    std::vector<double> pi = forward_mlp(model.decoder, model.skip, matvec(phi, lambda), nullptr);
    const double pi_sq = dot(pi, pi);
    double rho = pi_sq > 0.0 ? dot(a, pi) / pi_sq : 0.0;
    rho = std::max(rho, 0.0);

    res.lambda.lambda = std::move(lambda);
    res.rho = rho;
    res.projected.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) res.projected[i] = rho * pi[i];
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - res.projected[i];
        sq += d * d;
    }
    res.residual = std::sqrt(sq);
    return res;
}

namespace {

// Objective L(v, rho) = ||a - rho * g(lambda)||^2 with lambda = [v; 1 - sum v].
// Returns the reconstruction g(lambda) so callers can reuse it.
double eval_projection(const IAEModel& model, const Matrix& phi, std::span<const double> a,
                       std::span<const double> v, double rho, std::vector<double>* g_out,
                       MlpCache* dec_cache, std::vector<double>* lambda_out) {
    const std::size_t n = model.n_anchors();
    std::vector<double> lambda(n);
    double tail = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        lambda[i] = v[i];
        tail -= v[i];
    }
    lambda[n - 1] = tail;
    std::vector<double> g = forward_mlp(model.decoder, model.skip, matvec(phi, lambda), dec_cache);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - rho * g[i];
        sq += d * d;
    }
    if (g_out) *g_out = std::move(g);
    if (lambda_out) *lambda_out = std::move(lambda);
    return sq;
}

} // namespace

double projection_objective(const IAEModel& model, std::span<const double> a,
                            std::span<const double> v, double rho) {
    return eval_projection(model, encoded_anchors(model), a, v, rho, nullptr, nullptr, nullptr);
}

void projection_gradient(const IAEModel& model, std::span<const double> a,
                         std::span<const double> v, double rho, std::span<double> grad_v,
                         double& grad_rho) {
    const Matrix phi = encoded_anchors(model);
    std::vector<double> g;
    MlpCache cache;
    eval_projection(model, phi, a, v, rho, &g, &cache, nullptr);

    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - rho * g[i];
    grad_rho = -2.0 * dot(r, g);

    std::vector<double> dg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) dg[i] = -2.0 * rho * r[i];
    std::vector<double> dbary = backward_mlp(model.decoder, model.skip, cache, dg, nullptr);
    std::vector<double> dlambda = matvec_t(phi, dbary);
    // Reparameterization lambda_last = 1 - sum(v) folds the last component in.
    for (std::size_t i = 0; i + 1 < dlambda.size(); ++i) {
        grad_v[i] = dlambda[i] - dlambda.back();
    }
}

ProjectionResult project_manifold(const IAEModel& model, std::span<const double> a,
                                  const ProjectionOptions& opts) {
    const Matrix phi = encoded_anchors(model);
    const std::size_t n = model.n_anchors();

    ProjectionResult best = project_fast(model, a);
    std::vector<double> v(best.lambda.lambda.begin(), best.lambda.lambda.end() - 1);
    double rho = best.rho;
    if (rho == 0.0) {
        // rho == 0 is stationary in every direction (the lambda gradient
        // carries a factor rho), so descent could never leave a clamped fast
        // initializer; restart from the exact affine solve instead. The fast
        // result stays the incumbent best, so the residual guarantee holds.
        const std::vector<double> code = forward_mlp(model.encoder, model.skip, a, nullptr);
        const std::vector<double> lam = solve_barycentric(kkt_matrix(phi), phi, code);
        const std::vector<double> g = forward_mlp(model.decoder, model.skip, matvec(phi, lam),
                                                  nullptr);
        const double gg = dot(g, g);
        rho = gg > 0.0 ? std::max(dot(a, g) / gg, 0.0) : 0.0;
        if (rho == 0.0) rho = 1.0;
        v.assign(lam.begin(), lam.end() - 1);
    }
    best.converged = false;

    std::vector<double> params(v);
    params.push_back(rho);
    AdamState adam(params.size());
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> best_history{best.residual};
    if (opts.residual_trace) opts.residual_trace->push_back(best.residual);

    for (std::size_t it = 0; it < opts.max_iters; ++it) {
        std::span<const double> v_now(params.data(), n - 1);
        projection_gradient(model, a, v_now, params[n - 1],
                            std::span<double>(grad.data(), n - 1), grad[n - 1]);
        adam.step(params, grad, opts.lr);
        params[n - 1] = std::max(params[n - 1], 0.0);

        std::vector<double> g, lambda;
        const double sq = eval_projection(model, phi, a, {params.data(), n - 1}, params[n - 1],
                                          &g, nullptr, &lambda);
        const double residual = std::sqrt(sq);
        if (residual < best.residual) {
            best.residual = residual;
            best.rho = params[n - 1];
            best.lambda.lambda = lambda;
            for (std::size_t i = 0; i < a.size(); ++i) best.projected[i] = best.rho * g[i];
        }
        best_history.push_back(best.residual);
        if (opts.residual_trace) opts.residual_trace->push_back(best.residual);

        if (best_history.size() > opts.patience) {
            const double before = best_history[best_history.size() - 1 - opts.patience];
            if (before - best.residual <= opts.tol * std::max(1.0, best.residual)) {
                best.converged = true;
                break;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Serialization: JSON metadata plus a raw little-endian float64 blob holding,
// in order, each encoder layer's row-major weight then bias, then the decoder
// layers the same way.
// ---------------------------------------------------------------------------

namespace {

std::string blob_path_for(const std::string& json_path) {
    const std::size_t dot = json_path.find_last_of('.');
    const std::string stem =
        (dot == std::string::npos || json_path.find('/', dot) != std::string::npos)
            ? json_path
            : json_path.substr(0, dot);
    return stem + ".weights.bin";
}

void append_stack(const std::vector<DenseLayer>& stack, std::vector<double>& out) {
    for (const DenseLayer& layer : stack) {
        out.insert(out.end(), layer.weight.data(),
                   layer.weight.data() + layer.weight.rows() * layer.weight.cols());
        out.insert(out.end(), layer.bias.begin(), layer.bias.end());
    }
}

} // namespace

void save_model(const IAEModel& model, const std::string& json_path) {
    const std::string blob_path = blob_path_for(json_path);
    std::vector<double> blob;
    append_stack(model.encoder, blob);
    append_stack(model.decoder, blob);

    static_assert(std::endian::native == std::endian::little,
                  "weight blobs are written little-endian");
    std::ofstream bin(blob_path, std::ios::binary);
    if (!bin) throw std::runtime_error("save_model: cannot open " + blob_path);
    bin.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!bin) throw std::runtime_error("save_model: short write to " + blob_path);
    bin.close();

    nlohmann::json meta;
    meta["format"] = "iae-model/1";
    meta["input_dim"] = model.input_dim();
    meta["n_anchors"] = model.n_anchors();
    meta["n_encoder_layers"] = model.encoder.size();
    meta["n_decoder_layers"] = model.decoder.size();
    meta["skip"] = model.skip;
    meta["weights_file"] = blob_path.substr(blob_path.find_last_of('/') + 1);
    meta["weights_doubles"] = blob.size();
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < model.anchors.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (double x : model.anchors.row(r)) row.push_back(x);
        rows.push_back(std::move(row));
    }
    meta["anchors"] = std::move(rows);

    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("save_model: cannot open " + json_path);
    out << meta.dump(2) << '\n';
}

IAEModel load_model(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("load_model: cannot open " + json_path);
    nlohmann::json meta = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (meta.is_discarded()) {
        throw std::runtime_error("load_model: " + json_path + " is not valid JSON");
    }
    if (meta.value("format", "") != "iae-model/1") {
        throw std::runtime_error("load_model: unrecognized format in " + json_path);
    }

    IAEModel model;
    model.skip = meta.at("skip").get<double>();
    const std::size_t j = meta.at("input_dim").get<std::size_t>();
    const std::size_t n = meta.at("n_anchors").get<std::size_t>();
    const auto& rows = meta.at("anchors");
    if (rows.size() != n) throw std::runtime_error("load_model: anchor count mismatch");
    model.anchors = Matrix(n, j);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& row = rows[r];
        if (row.size() != j) throw std::runtime_error("load_model: anchor length mismatch");
        for (std::size_t c = 0; c < j; ++c) model.anchors(r, c) = row[c].get<double>();
    }

    const std::size_t n_enc = meta.at("n_encoder_layers").get<std::size_t>();
    const std::size_t n_dec = meta.at("n_decoder_layers").get<std::size_t>();
    const std::size_t expected = (n_enc + n_dec) * (j * j + j);
    if (meta.at("weights_doubles").get<std::size_t>() != expected) {
        throw std::runtime_error("load_model: weight count mismatch in " + json_path);
    }

    const std::size_t slash = json_path.find_last_of('/');
    const std::string dir = slash == std::string::npos ? "" : json_path.substr(0, slash + 1);
    const std::string blob_path = dir + meta.at("weights_file").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw std::runtime_error("load_model: cannot open " + blob_path);
    std::vector<double> blob(expected);
    bin.read(reinterpret_cast<char*>(blob.data()),
             static_cast<std::streamsize>(expected * sizeof(double)));
    if (static_cast<std::size_t>(bin.gcount()) != expected * sizeof(double)) {
        throw std::runtime_error("load_model: weight blob " + blob_path + " is truncated");
    }

    std::size_t off = 0;
    auto read_stack = [&](std::size_t count, std::vector<DenseLayer>& stack) {
        for (std::size_t l = 0; l < count; ++l) {
            DenseLayer layer{Matrix(j, j), std::vector<double>(j)};
            std::memcpy(layer.weight.data(), blob.data() + off, j * j * sizeof(double));
            off += j * j;
            std::copy(blob.begin() + static_cast<std::ptrdiff_t>(off),
                      blob.begin() + static_cast<std::ptrdiff_t>(off + j), layer.bias.begin());
            off += j;
            stack.push_back(std::move(layer));
        }
    };
    read_stack(n_enc, model.encoder);
    read_stack(n_dec, model.decoder);
    return model;
}

std::vector<std::size_t> farthest_point_anchors(const Matrix& dataset, std::size_t n) {
    if (n < 2 || n > dataset.rows()) {
        throw std::invalid_argument("farthest_point_anchors: need 2 <= n <= rows");
    }
    auto dist = [&](std::size_t a, std::size_t b) {
        double sq = 0.0;
        for (std::size_t c = 0; c < dataset.cols(); ++c) {
            const double d = dataset(a, c) - dataset(b, c);
            sq += d * d;
        }
        return sq;
    };
    // Seed with the most distant pair, then grow by max-min distance.
    std::vector<std::size_t> picked;
    double best = -1.0;
    std::size_t bi = 0, bj = 1;
    for (std::size_t a = 0; a < dataset.rows(); ++a) {
        for (std::size_t b = a + 1; b < dataset.rows(); ++b) {
            const double d = dist(a, b);
            if (d > best) {
                best = d;
                bi = a;
                bj = b;
            }
        }
    }
    picked = {bi, bj};
    while (picked.size() < n) {
        double far_d = -1.0;
        std::size_t far_i = 0;
        for (std::size_t a = 0; a < dataset.rows(); ++a) {
            if (std::find(picked.begin(), picked.end(), a) != picked.end()) continue;
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t p : picked) nearest = std::min(nearest, dist(a, p));
            if (nearest > far_d) {
                far_d = nearest;
                far_i = a;
            }
        }
        picked.push_back(far_i);
    }
    return picked;
}

} // namespace sgmca
