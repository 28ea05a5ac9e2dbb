#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "sgmca/iae.hpp"
#include "sgmca/matrix.hpp"
#include "sgmca/metrics.hpp"
#include "sgmca/synthdata.hpp"

using namespace sgmca;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "sgmca_iae_test";
    fs::create_directories(dir);
    return dir;
}

// Small random model with tanh kept in its active region so finite
// differences stay well conditioned.
IAEModel make_random_model(std::size_t j, std::size_t n, std::size_t layers,
                           std::uint64_t seed) {
    IAEModel model;
    model.anchors = gaussian_matrix(n, j, seed);
    const double w_scale = 0.3 / std::sqrt(static_cast<double>(j));
    std::uint64_t s = seed + 1;
    auto stack = [&](std::size_t count) {
        std::vector<DenseLayer> out;
        for (std::size_t l = 0; l < count; ++l) {
            DenseLayer layer;
            layer.weight = gaussian_matrix(j, j, s++);
            for (double& v : layer.weight.values()) v *= w_scale;
            const Matrix b = gaussian_matrix(1, j, s++);
            layer.bias.assign(b.row(0).begin(), b.row(0).end());
            for (double& v : layer.bias) v *= 0.1;
            out.push_back(std::move(layer));
        }
        return out;
    };
    model.encoder = stack(layers);
    model.decoder = stack(layers);
    return model;
}

std::vector<double> random_input(std::size_t j, std::uint64_t seed, double scale = 0.5) {
    const Matrix m = gaussian_matrix(1, j, seed);
    std::vector<double> x(m.row(0).begin(), m.row(0).end());
    for (double& v : x) v *= scale;
    return x;
}

// |fd - an| <= abs_tol + rel_tol * |fd| — relative where the gradient is
// sizable, absolute where cancellation makes the quotient meaningless.
void check_close_grad(double analytic, double fd) {
    CHECK(std::abs(analytic - fd) <= 1e-6 + 1e-4 * std::abs(fd));
}

// Dataset of unit-norm Gaussian lines whose center sweeps the given fraction
// of the band (the generator takes centers in channel units).
Matrix gaussian_line_dataset(std::size_t channels, std::size_t count, double lo, double hi) {
    Matrix data(count, channels);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        const double center = (lo + t * (hi - lo)) * static_cast<double>(channels);
        data.set_row(i, gen_gaussian_line(center, 0.15, channels));
    }
    return data;
}

} // namespace

// ---------------------------------------------------------------------------
// anchors and forward passes
// ---------------------------------------------------------------------------

TEST_CASE("anchor sets reject degenerate geometry") {
    CHECK_NOTHROW(make_anchor_set(gaussian_matrix(3, 6, 11)));
    CHECK_THROWS_AS(make_anchor_set(Matrix(1, 6)), std::invalid_argument);

    Matrix with_zero = gaussian_matrix(2, 6, 12);
    with_zero.set_row(1, std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(make_anchor_set(with_zero), std::invalid_argument);

    Matrix collinear = gaussian_matrix(2, 6, 13);
    std::vector<double> doubled(collinear.row(0).begin(), collinear.row(0).end());
    for (double& v : doubled) v *= 2.0;
    collinear.set_row(1, doubled);
    CHECK_THROWS_AS(make_anchor_set(collinear), std::invalid_argument);

    // anti-parallel counts as collinear: the latent line through both is degenerate
    Matrix anti = gaussian_matrix(2, 6, 14);
    std::vector<double> flipped(anti.row(0).begin(), anti.row(0).end());
    for (double& v : flipped) v = -v;
    anti.set_row(1, flipped);
    CHECK_THROWS_AS(make_anchor_set(anti), std::invalid_argument);
}

TEST_CASE("encode and decode validate their input widths") {
    const IAEModel model = make_random_model(5, 2, 2, 21);
    CHECK(encode(model, random_input(5, 1)).size() == 5);
    CHECK(decode(model, random_input(5, 2)).size() == 5);
    CHECK_THROWS_AS(encode(model, random_input(4, 3)), std::invalid_argument);
    CHECK_THROWS_AS(decode(model, random_input(6, 4)), std::invalid_argument);
}

TEST_CASE("encoded anchor columns are the encoder applied to each anchor row") {
    const IAEModel model = make_random_model(6, 3, 2, 22);
    const Matrix phi = encoded_anchors(model);
    REQUIRE(phi.rows() == 6);
    REQUIRE(phi.cols() == 3);
    for (std::size_t n = 0; n < 3; ++n) {
        const std::vector<double> code = encode(model, model.anchors.row(n));
        const std::vector<double> col = phi.col(n);
        for (std::size_t r = 0; r < 6; ++r) CHECK(col[r] == code[r]);
    }
}

TEST_CASE("barycentric weights sum to one and invert representable codes") {
    const IAEModel model = make_random_model(6, 3, 2, 23);
    const Matrix phi = encoded_anchors(model);

    // arbitrary code: constraint satisfied regardless of representability
    const LatentCode any = barycentric_weights(model, random_input(6, 5));
    double sum = 0.0;
    for (double v : any.lambda) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // a code built from affine weights is recovered exactly (phi has full
    // column rank for generic random models)
    const std::vector<double> lam_true{0.6, -0.1, 0.5};
    std::vector<double> code(6, 0.0);
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t n = 0; n < 3; ++n) code[r] += phi(r, n) * lam_true[n];
    }
    const LatentCode solved = barycentric_weights(model, code);
    REQUIRE(solved.lambda.size() == 3);
    for (std::size_t n = 0; n < 3; ++n) {
        CHECK(solved.lambda[n] == doctest::Approx(lam_true[n]).epsilon(1e-9));
    }
}

TEST_CASE("generate with a one-hot code decodes the matching encoded anchor") {
    const IAEModel model = make_random_model(5, 3, 2, 24);
    const Matrix phi = encoded_anchors(model);
    for (std::size_t n = 0; n < 3; ++n) {
        LatentCode code;
        code.lambda.assign(3, 0.0);
        code.lambda[n] = 1.0;
        const std::vector<double> g = generate(model, code);
        const std::vector<double> direct = decode(model, phi.col(n));
        for (std::size_t r = 0; r < 5; ++r) {
            CHECK(g[r] == doctest::Approx(direct[r]).epsilon(1e-12));
        }
    }
    LatentCode wrong;
    wrong.lambda.assign(4, 0.25);
    CHECK_THROWS_AS(generate(model, wrong), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// gradients against central finite differences
// ---------------------------------------------------------------------------

TEST_CASE("the projection gradient matches finite differences of the objective") {
    const IAEModel model = make_random_model(5, 3, 2, 31);
    const std::vector<double> a = random_input(5, 6);
    std::vector<double> v{0.4, 0.3};
    const double rho = 0.8;

    std::vector<double> grad_v(v.size(), 0.0);
    double grad_rho = 0.0;
    projection_gradient(model, a, v, rho, grad_v, grad_rho);

    const double h = 1e-6;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::vector<double> vp = v, vm = v;
        vp[i] += h;
        vm[i] -= h;
        const double fd = (projection_objective(model, a, vp, rho) -
                           projection_objective(model, a, vm, rho)) /
                          (2.0 * h);
        check_close_grad(grad_v[i], fd);
    }
    const double fd_rho = (projection_objective(model, a, v, rho + h) -
                           projection_objective(model, a, v, rho - h)) /
                          (2.0 * h);
    check_close_grad(grad_rho, fd_rho);
}

TEST_CASE("batch weight gradients match finite differences of the batch loss") {
    IAEModel model = make_random_model(5, 3, 2, 32);
    Matrix batch(4, 5);
    for (std::size_t s = 0; s < 4; ++s) batch.set_row(s, random_input(5, 40 + s));

    const IAEGradients grads = iae_batch_gradients(model, batch, false);
    const double h = 1e-6;

    auto fd_weight = [&](std::vector<DenseLayer>& stack, std::size_t l, std::size_t r,
                         std::size_t c) {
        double& w = stack[l].weight(r, c);
        const double keep = w;
        w = keep + h;
        const double up = iae_batch_loss(model, batch);
        w = keep - h;
        const double dn = iae_batch_loss(model, batch);
        w = keep;
        return (up - dn) / (2.0 * h);
    };
    auto fd_bias = [&](std::vector<DenseLayer>& stack, std::size_t l, std::size_t i) {
        double& b = stack[l].bias[i];
        const double keep = b;
        b = keep + h;
        const double up = iae_batch_loss(model, batch);
        b = keep - h;
        const double dn = iae_batch_loss(model, batch);
        b = keep;
        return (up - dn) / (2.0 * h);
    };

    for (std::size_t l = 0; l < 2; ++l) {
        for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 3}, {4, 2}}) {
            check_close_grad(grads.encoder[l].weight(r, c), fd_weight(model.encoder, l, r, c));
            check_close_grad(grads.decoder[l].weight(r, c), fd_weight(model.decoder, l, r, c));
        }
        check_close_grad(grads.encoder[l].bias[1], fd_bias(model.encoder, l, 1));
        check_close_grad(grads.decoder[l].bias[3], fd_bias(model.decoder, l, 3));
    }
}

TEST_CASE("stopping the lambda gradient changes the encoder gradient only") {
    const IAEModel model = make_random_model(5, 3, 2, 33);
    Matrix batch(3, 5);
    for (std::size_t s = 0; s < 3; ++s) batch.set_row(s, random_input(5, 50 + s));

    const IAEGradients full = iae_batch_gradients(model, batch, false);
    const IAEGradients stopped = iae_batch_gradients(model, batch, true);

    double enc_diff = 0.0;
    for (std::size_t l = 0; l < full.encoder.size(); ++l) {
        for (std::size_t i = 0; i < full.encoder[l].weight.values().size(); ++i) {
            enc_diff += std::abs(full.encoder[l].weight.values()[i] -
                                 stopped.encoder[l].weight.values()[i]);
        }
    }
    CHECK(enc_diff > 1e-8);

    // the decoder backward pass does not involve the implicit solve
    for (std::size_t l = 0; l < full.decoder.size(); ++l) {
        for (std::size_t i = 0; i < full.decoder[l].weight.values().size(); ++i) {
            CHECK(full.decoder[l].weight.values()[i] ==
                  doctest::Approx(stopped.decoder[l].weight.values()[i]).epsilon(1e-12));
        }
    }
}

// ---------------------------------------------------------------------------
// projections
// ---------------------------------------------------------------------------

TEST_CASE("fast projection reports self-consistent fields") {
    const IAEModel model = make_random_model(6, 3, 2, 34);
    const std::vector<double> a = random_input(6, 7);
    const ProjectionResult res = project_fast(model, a);

    double sum = 0.0;
    for (double v : res.lambda.lambda) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(res.rho >= 0.0);

    // projected == rho * g(lambda)
    const std::vector<double> g = generate(model, res.lambda);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(res.projected[i] == doctest::Approx(res.rho * g[i]).epsilon(1e-12));
        const double d = a[i] - res.projected[i];
        sq += d * d;
    }
    CHECK(res.residual == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));

    // the workspace overload is the same computation
    const ProjectionWorkspace ws = make_projection_workspace(model);
    const ProjectionResult res2 = project_fast(model, ws, a);
    CHECK(res2.residual == res.residual);
    CHECK(res2.rho == res.rho);
    for (std::size_t n = 0; n < res.lambda.lambda.size(); ++n) {
        CHECK(res2.lambda.lambda[n] == res.lambda.lambda[n]);
    }
}

TEST_CASE("manifold projection never does worse than the fast path") {
    const IAEModel model = make_random_model(6, 3, 2, 35);
    const std::vector<double> a = random_input(6, 8);
    const ProjectionResult fast = project_fast(model, a);

    std::vector<double> trace;
    ProjectionOptions opts;
    opts.max_iters = 2000;
    opts.tol = 1e-6;
    opts.patience = 20;
    opts.residual_trace = &trace;
    const ProjectionResult iter = project_manifold(model, a, opts);

    CHECK(iter.residual <= fast.residual);
    CHECK(iter.converged);
    REQUIRE(!trace.empty());
    CHECK(trace.front() == fast.residual);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);

    // projected field stays consistent with (lambda, rho)
    const std::vector<double> g = generate(model, iter.lambda);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(iter.projected[i] == doctest::Approx(iter.rho * g[i]).epsilon(1e-10));
    }

    // a zero-iteration run reproduces the fast initialization, unconverged
    ProjectionOptions none;
    none.max_iters = 0;
    const ProjectionResult frozen = project_manifold(model, a, none);
    CHECK(frozen.residual == fast.residual);
    CHECK(!frozen.converged);
}

TEST_CASE("the projection objective is the squared residual of generate") {
    const IAEModel model = make_random_model(5, 3, 2, 36);
    const std::vector<double> a = random_input(5, 9);
    const std::vector<double> v{0.3, 0.5};
    const double rho = 1.2;

    LatentCode code;
    code.lambda = {v[0], v[1], 1.0 - v[0] - v[1]};
    const std::vector<double> g = generate(model, code);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - rho * g[i];
        sq += d * d;
    }
    CHECK(projection_objective(model, a, v, rho) == doctest::Approx(sq).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

TEST_CASE("training on a one-parameter family reduces the loss and projects held-out spectra") {
    const std::size_t channels = 16;
    const Matrix data = gaussian_line_dataset(channels, 48, 0.2, 0.8);
    Matrix anchor_rows(2, channels);
    anchor_rows.set_row(0, data.row(0));
    anchor_rows.set_row(1, data.row(47));
    const AnchorSet anchors = make_anchor_set(anchor_rows);

    IAETrainConfig config;
    config.epochs = 400;
    config.batch_size = 12;
    config.learning_rate = 1e-3;
    config.seed = 5;
    config.n_layers = 3;
    const IAETrainResult result = train_iae(data, anchors, config);

    REQUIRE(result.train_loss.size() == 400);
    REQUIRE(result.val_loss.size() == 400);
    CHECK(result.train_loss.back() < result.train_loss.front());
    CHECK(result.val_loss.back() < result.val_loss.front());
    for (double l : result.train_loss) CHECK(std::isfinite(l));

    // a held-out line between the anchors projects close to itself
    const std::vector<double> truth =
        gen_gaussian_line(0.47 * static_cast<double>(channels), 0.15, channels);
    const ProjectionResult proj = project_manifold(result.model, truth);
    CHECK(sad(proj.projected, truth) >= 12.0);

    // identical configuration reproduces the run bit for bit
    const IAETrainResult again = train_iae(data, anchors, config);
    CHECK(again.train_loss == result.train_loss);
    for (std::size_t l = 0; l < result.model.encoder.size(); ++l) {
        CHECK(again.model.encoder[l].weight.values() == result.model.encoder[l].weight.values());
        CHECK(again.model.encoder[l].bias == result.model.encoder[l].bias);
    }
}

TEST_CASE("training validates its inputs") {
    const Matrix data = gaussian_line_dataset(8, 20, 0.2, 0.8);
    Matrix anchor_rows(2, 8);
    anchor_rows.set_row(0, data.row(0));
    anchor_rows.set_row(1, data.row(19));
    const AnchorSet anchors = make_anchor_set(anchor_rows);

    IAETrainConfig config;
    config.epochs = 1;
    config.batch_size = 40;  // larger than the dataset
    CHECK_THROWS_AS(train_iae(data, anchors, config), std::invalid_argument);

    config.batch_size = 10;
    config.epochs = 0;
    CHECK_THROWS_AS(train_iae(data, anchors, config), std::invalid_argument);

    Matrix wrong(2, 9);
    wrong.set_row(0, gaussian_matrix(1, 9, 1).row(0));
    wrong.set_row(1, gaussian_matrix(1, 9, 2).row(0));
    config.epochs = 1;
    CHECK_THROWS_AS(train_iae(data, make_anchor_set(wrong), config), std::invalid_argument);
}

TEST_CASE("a zero validation fraction leaves the validation trace empty") {
    const Matrix data = gaussian_line_dataset(8, 16, 0.2, 0.8);
    Matrix anchor_rows(2, 8);
    anchor_rows.set_row(0, data.row(0));
    anchor_rows.set_row(1, data.row(15));

    IAETrainConfig config;
    config.epochs = 3;
    config.batch_size = 8;
    config.validation_fraction = 0.0;
    const IAETrainResult result = train_iae(data, make_anchor_set(anchor_rows), config);
    CHECK(result.train_loss.size() == 3);
    CHECK(result.val_loss.empty());
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

TEST_CASE("models round-trip through save and load bit-exactly") {
    const IAEModel model = make_random_model(6, 3, 2, 61);
    const fs::path json_path = temp_dir() / "model.json";
    save_model(model, json_path.string());
    CHECK(fs::exists(temp_dir() / "model.weights.bin"));

    const IAEModel loaded = load_model(json_path.string());
    CHECK(loaded.skip == model.skip);
    CHECK(loaded.anchors.values() == model.anchors.values());
    REQUIRE(loaded.encoder.size() == model.encoder.size());
    REQUIRE(loaded.decoder.size() == model.decoder.size());
    for (std::size_t l = 0; l < model.encoder.size(); ++l) {
        CHECK(loaded.encoder[l].weight.values() == model.encoder[l].weight.values());
        CHECK(loaded.encoder[l].bias == model.encoder[l].bias);
        CHECK(loaded.decoder[l].weight.values() == model.decoder[l].weight.values());
        CHECK(loaded.decoder[l].bias == model.decoder[l].bias);
    }

    // projections of the two models agree bitwise
    const std::vector<double> a = random_input(6, 62);
    const ProjectionResult p1 = project_fast(model, a);
    const ProjectionResult p2 = project_fast(loaded, a);
    CHECK(p1.residual == p2.residual);
    CHECK(p1.projected == p2.projected);
}

TEST_CASE("loading rejects missing or malformed model files") {
    CHECK_THROWS_AS(load_model((temp_dir() / "no_such_model.json").string()),
                    std::runtime_error);

    const fs::path bad = temp_dir() / "bad_model.json";
    std::ofstream(bad) << "this is not a model";
    CHECK_THROWS_AS(load_model(bad.string()), std::runtime_error);
}

// ---------------------------------------------------------------------------
// anchor suggestion
// ---------------------------------------------------------------------------

TEST_CASE("farthest-point sampling seeds with the extreme pair and grows by max-min distance") {
    // points on a line at 0, 1, 4, 9, 10: the extreme pair is (0, 10), the
    // next farthest-from-both is 4
    Matrix data(5, 1, std::vector<double>{0.0, 1.0, 4.0, 9.0, 10.0});
    const std::vector<std::size_t> three = farthest_point_anchors(data, 3);
    REQUIRE(three.size() == 3);
    CHECK(three[0] == 0);
    CHECK(three[1] == 4);
    CHECK(three[2] == 2);

    const std::vector<std::size_t> all = farthest_point_anchors(data, 5);
    std::vector<std::size_t> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});

    CHECK_THROWS_AS(farthest_point_anchors(data, 1), std::invalid_argument);
    CHECK_THROWS_AS(farthest_point_anchors(data, 6), std::invalid_argument);
}
