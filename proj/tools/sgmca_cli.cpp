// Command-line harness: dataset generation, IAE training, manifold
// projection, separation runs, Monte-Carlo sweeps and metric evaluation.
// Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgmca/baselines.hpp"
#include "sgmca/experiment.hpp"
#include "sgmca/iae.hpp"
#include "sgmca/metrics.hpp"
#include "sgmca/npy.hpp"
#include "sgmca/separation.hpp"
#include "sgmca/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string output_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("SGMCA_OUTPUT_DIR"); env && *env) return env;
    return ".";
}

// Config-file value unless the flag was given on the command line.
template <typename T>
void merge(const CLI::App& app, const std::string& flag, const json& cfg, const char* key,
           T& value) {
    if (app.count(flag) > 0) return;  // explicit flag wins
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    return json::parse(in);
}

sgmca::SpectrumFamily family_by_name(const std::string& name, std::size_t channels) {
    const sgmca::ExperimentFamilies fams = sgmca::default_families(channels);
    if (name == "gaussian_line") return fams.gauss;
    if (name == "powerlaw") return fams.sync;
    if (name == "thermal") return fams.thermal;
    throw CLI::ValidationError("--family",
                               "expected gaussian_line, powerlaw or thermal, got " + name);
}

sgmca::PriorList load_priors(const std::vector<std::string>& model_paths,
                             std::size_t proj_iters) {
    sgmca::ProjectionOptions opts;
    opts.max_iters = proj_iters;
    sgmca::PriorList priors;
    for (const std::string& path : model_paths) {
        priors.push_back(std::make_shared<sgmca::IAEPrior>(sgmca::load_model(path), opts));
    }
    return priors;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string config, outdir;
    std::uint64_t seed = 0;
    std::size_t width = 64, height = 64, channels = 40, trials = 10, family_samples = 200;
    double snr = 40.0, delta = 20.0, k = 1.0;
};

int cmd_generate(const CLI::App& app, GenerateArgs& a) {
    const json cfg = load_config(a.config);
    merge(app, "--seed", cfg, "seed", a.seed);
    merge(app, "--width", cfg, "width", a.width);
    merge(app, "--height", cfg, "height", a.height);
    merge(app, "--channels", cfg, "channels", a.channels);
    merge(app, "--trials", cfg, "trials", a.trials);
    merge(app, "--family-samples", cfg, "family_samples", a.family_samples);
    merge(app, "--snr", cfg, "snr", a.snr);
    merge(app, "--delta", cfg, "delta", a.delta);
    merge(app, "--k", cfg, "k", a.k);

    const fs::path dir = output_dir(a.outdir);
    fs::create_directories(dir);

    const sgmca::ExperimentFamilies fams = sgmca::default_families(a.channels);
    std::vector<std::string> files;
    auto dump = [&](const std::string& name, const sgmca::Matrix& m) {
        sgmca::write_npy((dir / name).string(), m);
        files.push_back(name);
    };

    dump("sync_spectra.npy",
         sgmca::sample_spectra(fams.sync, a.family_samples, sgmca::derive_seed(a.seed, 11, 0)));
    dump("thermal_spectra.npy",
         sgmca::sample_spectra(fams.thermal, a.family_samples, sgmca::derive_seed(a.seed, 11, 1)));
    dump("gauss_spectra.npy",
         sgmca::sample_spectra(fams.gauss, a.family_samples, sgmca::derive_seed(a.seed, 11, 2)));

    const sgmca::Matrix templates =
        sgmca::gen_templates(a.width, a.height, 4, sgmca::derive_seed(a.seed, 8, 0));
    dump("templates.npy", templates);

    for (std::size_t t = 0; t < a.trials; ++t) {
        sgmca::MixtureSpec spec;
        spec.snr_db = a.snr;
        spec.delta = a.delta;
        spec.k_ratio = a.k;
        spec.seed = sgmca::derive_seed(a.seed, 100, t);
        const sgmca::ExperimentData data =
            sgmca::build_experiment(spec, fams, templates, a.width, a.height);
        const std::string stem = "trial_" + std::to_string(t);
        dump(stem + "_x.npy", data.x);
        dump(stem + "_a.npy", data.a_true);
        dump(stem + "_s.npy", data.s_true);
        dump(stem + "_n.npy", data.n);
    }

    json meta;
    meta["seed"] = a.seed;
    meta["width"] = a.width;
    meta["height"] = a.height;
    meta["channels"] = a.channels;
    meta["snr"] = a.snr;
    meta["delta"] = a.delta;
    meta["k"] = a.k;
    meta["trials"] = a.trials;
    meta["family_samples"] = a.family_samples;
    sgmca::write_manifest((dir / "manifest.json").string(), files, meta);
    std::cout << "wrote " << files.size() << " arrays + manifest.json to " << dir.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-iae
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config, outdir, family = "gaussian_line", model_out = "model.json",
                loss_out = "loss.csv";
    std::string dataset;  // optional NPY of training spectra (rows)
    std::size_t channels = 64, samples = 200, anchors = 2, epochs = 1000, batch = 25,
                layers = 4;
    double lr = 1e-4, val_fraction = 0.25;
    std::uint64_t seed = 0;
    bool stop_gradient = false;
};

int cmd_train_iae(const CLI::App& app, TrainArgs& a) {
    const json cfg = load_config(a.config);
    merge(app, "--family", cfg, "family", a.family);
    merge(app, "--channels", cfg, "channels", a.channels);
    merge(app, "--samples", cfg, "samples", a.samples);
    merge(app, "--anchors", cfg, "anchors", a.anchors);
    merge(app, "--epochs", cfg, "epochs", a.epochs);
    merge(app, "--batch", cfg, "batch", a.batch);
    merge(app, "--layers", cfg, "layers", a.layers);
    merge(app, "--lr", cfg, "lr", a.lr);
    merge(app, "--seed", cfg, "seed", a.seed);

    const fs::path dir = output_dir(a.outdir);
    fs::create_directories(dir);

    sgmca::Matrix dataset(1, 1);
    if (!a.dataset.empty()) {
        dataset = sgmca::read_npy(a.dataset);
    } else {
        dataset = sgmca::sample_spectra(family_by_name(a.family, a.channels), a.samples,
                                        sgmca::derive_seed(a.seed, 11, 5));
    }

    const std::vector<std::size_t> picks = sgmca::farthest_point_anchors(dataset, a.anchors);
    sgmca::Matrix anchor_rows(picks.size(), dataset.cols());
    for (std::size_t i = 0; i < picks.size(); ++i) anchor_rows.set_row(i, dataset.row(picks[i]));

    sgmca::IAETrainConfig tc;
    tc.epochs = a.epochs;
    tc.batch_size = a.batch;
    tc.learning_rate = a.lr;
    tc.seed = a.seed;
    tc.validation_fraction = a.val_fraction;
    tc.n_layers = a.layers;
    tc.stop_gradient_lambda = a.stop_gradient;
    const sgmca::IAETrainResult result =
        sgmca::train_iae(dataset, sgmca::make_anchor_set(anchor_rows), tc);

    sgmca::save_model(result.model, (dir / a.model_out).string());
    std::ofstream loss(dir / a.loss_out);
    loss << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
        loss << e << "," << sgmca::format_fixed(result.train_loss[e]) << ","
             << (e < result.val_loss.size() ? sgmca::format_fixed(result.val_loss[e]) : "")
             << "\n";
    }
    std::cout << "trained " << a.family << " model: final train loss "
              << sgmca::format_fixed(result.train_loss.back()) << ", wrote "
              << (dir / a.model_out).string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectArgs {
    std::string model, input, outdir, out = "projected.npy";
    bool fast = false;
    std::size_t proj_iters = 300;
};

int cmd_project(ProjectArgs& a) {
    const sgmca::IAEModel model = sgmca::load_model(a.model);
    const sgmca::Matrix spectra = sgmca::read_npy(a.input);
    const fs::path dir = output_dir(a.outdir);
    fs::create_directories(dir);

    sgmca::ProjectionOptions opts;
    opts.max_iters = a.proj_iters;
    sgmca::Matrix projected(spectra.rows(), spectra.cols());
    std::cout << "row,residual,sad_db,converged\n";
    for (std::size_t r = 0; r < spectra.rows(); ++r) {
        const sgmca::ProjectionResult res =
            a.fast ? sgmca::project_fast(model, spectra.row(r))
                   : sgmca::project_manifold(model, spectra.row(r), opts);
        projected.set_row(r, res.projected);
        std::cout << r << "," << sgmca::format_fixed(res.residual) << ","
                  << sgmca::format_fixed(sgmca::sad(res.projected, spectra.row(r))) << ","
                  << (res.converged ? 1 : 0) << "\n";
    }
    sgmca::write_npy((dir / a.out).string(), projected);
    return 0;
}

// ---------------------------------------------------------------------------
// separate / evaluate
// ---------------------------------------------------------------------------

struct SeparateArgs {
    std::string config, outdir, data, algo = "sgmca";
    std::vector<std::string> models;
    std::string truth_a, truth_s, noise;
    std::size_t width = 64, height = 64, n_sources = 4, gmca_iters = 100, max_iters = 50,
                n_scales = 3, nmf_iters = 500, proj_iters = 300;
    double k_mad = 3.0;
    std::uint64_t seed = 0;
    double snr = 0.0, delta = 0.0, k = 1.0;  // echoed into the CSV row
    std::size_t trial = 0;
};

int cmd_separate(const CLI::App& app, SeparateArgs& a) {
    const json cfg = load_config(a.config);
    merge(app, "--width", cfg, "width", a.width);
    merge(app, "--height", cfg, "height", a.height);
    merge(app, "--sources", cfg, "sources", a.n_sources);
    merge(app, "--gmca-iters", cfg, "gmca_iters", a.gmca_iters);
    merge(app, "--max-iters", cfg, "max_iters", a.max_iters);
    merge(app, "--scales", cfg, "n_scales", a.n_scales);
    merge(app, "--k-mad", cfg, "k_mad", a.k_mad);
    merge(app, "--seed", cfg, "seed", a.seed);

    const sgmca::Matrix x = sgmca::read_npy(a.data);
    const fs::path dir = output_dir(a.outdir);
    fs::create_directories(dir);

    sgmca::Matrix a_est, s_est;
    std::string stop = "fixed";
    std::size_t iterations = 0;
    const sgmca::Algorithm algo = sgmca::algorithm_from_string(a.algo);
    if (algo == sgmca::Algorithm::hals || algo == sgmca::Algorithm::snmf) {
        sgmca::NmfOptions opts;
        opts.iters = a.nmf_iters;
        opts.seed = a.seed;
        const sgmca::NmfResult r = algo == sgmca::Algorithm::hals
                                       ? sgmca::hals(x, a.n_sources, opts)
                                       : sgmca::snmf(x, a.n_sources, opts);
        a_est = r.a;
        s_est = r.s;
        iterations = a.nmf_iters;
    } else {
        sgmca::SgmcaOptions opts;
        opts.init.width = a.width;
        opts.init.height = a.height;
        opts.init.n_scales = a.n_scales;
        opts.init.iters = a.gmca_iters;
        opts.init.k_mad = a.k_mad;
        opts.init.seed = a.seed;
        opts.max_iters = a.max_iters;
        opts.k_mad = a.k_mad;
        const sgmca::PriorList priors =
            algo == sgmca::Algorithm::sgmca ? load_priors(a.models, a.proj_iters)
                                            : sgmca::PriorList{};
        const sgmca::SeparationResult r = sgmca::sgmca(x, a.n_sources, priors, opts);
        a_est = r.a;
        s_est = r.s;
        iterations = r.iterations;
        stop = r.stop_reason == sgmca::SeparationResult::StopReason::converged ? "converged"
                                                                               : "max_iters";
        for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
    }
    std::cerr << "stopped: " << stop << " after " << iterations << " iterations\n";

    sgmca::write_npy((dir / "a_est.npy").string(), a_est);
    sgmca::write_npy((dir / "s_est.npy").string(), s_est);

    if (!a.truth_a.empty() && !a.truth_s.empty()) {
        const sgmca::Matrix a_true = sgmca::read_npy(a.truth_a);
        const sgmca::Matrix s_true = sgmca::read_npy(a.truth_s);
        const sgmca::Matrix n = a.noise.empty() ? sgmca::Matrix(0, s_true.cols())
                                                : sgmca::read_npy(a.noise);
        const sgmca::EvalReport rep = sgmca::evaluate(a_est, s_est, a_true, s_true, n);
        sgmca::TrialRow row;
        row.algo = a.algo;
        row.trial = a.trial;
        row.seed = a.seed;
        row.snr = a.snr;
        row.delta = a.delta;
        row.k = a.k;
        row.sad_overall = rep.sad_overall;
        row.sad = rep.sad_per_spectrum;
        row.sdr = rep.sdr;
        row.sir = rep.sir;
        row.snr_src = rep.snr;
        row.sar = rep.sar;
        std::cout << sgmca::trial_csv_header(s_true.rows()) << "\n"
                  << sgmca::trial_csv_row(row) << "\n";
    }
    return 0;
}

struct EvaluateArgs {
    std::string est_a, est_s, true_a, true_s, noise;
};

int cmd_evaluate(EvaluateArgs& a) {
    const sgmca::Matrix a_est = sgmca::read_npy(a.est_a);
    const sgmca::Matrix s_est = sgmca::read_npy(a.est_s);
    const sgmca::Matrix a_true = sgmca::read_npy(a.true_a);
    const sgmca::Matrix s_true = sgmca::read_npy(a.true_s);
    const sgmca::Matrix n =
        a.noise.empty() ? sgmca::Matrix(0, s_true.cols()) : sgmca::read_npy(a.noise);
    const sgmca::EvalReport rep = sgmca::evaluate(a_est, s_est, a_true, s_true, n);

    sgmca::TrialRow row;
    row.algo = "evaluate";
    row.sad_overall = rep.sad_overall;
    row.sad = rep.sad_per_spectrum;
    row.sdr = rep.sdr;
    row.sir = rep.sir;
    row.snr_src = rep.snr;
    row.sar = rep.sar;
    std::cout << sgmca::trial_csv_header(s_true.rows()) << "\n"
              << sgmca::trial_csv_row(row) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentArgs {
    std::string config, outdir, sweep = "snr";
    std::vector<double> grid;
    std::vector<std::string> subsets, algorithms;
    std::string sync_model, thermal_model, gauss_model;
    bool nn = false;  // use nearest-neighbor dictionaries as the sgmca priors
    std::size_t trials = 10, width = 64, height = 64, channels = 40, gmca_iters = 100,
                max_iters = 50, n_scales = 3, nmf_iters = 500, proj_iters = 300;
    double snr = 40.0, delta = 20.0, k = 1.0, k_mad = 3.0;
    std::string base_subset = "all";
    std::uint64_t master_seed = 0;
};

int cmd_experiment(const CLI::App& app, ExperimentArgs& a) {
    const json cfg = load_config(a.config);
    merge(app, "--sweep", cfg, "sweep", a.sweep);
    merge(app, "--grid", cfg, "grid", a.grid);
    merge(app, "--subsets", cfg, "subsets", a.subsets);
    merge(app, "--algorithms", cfg, "algorithms", a.algorithms);
    merge(app, "--trials", cfg, "trials", a.trials);
    merge(app, "--width", cfg, "width", a.width);
    merge(app, "--height", cfg, "height", a.height);
    merge(app, "--channels", cfg, "channels", a.channels);
    merge(app, "--snr", cfg, "snr", a.snr);
    merge(app, "--delta", cfg, "delta", a.delta);
    merge(app, "--k", cfg, "k", a.k);
    merge(app, "--subset", cfg, "models_subset", a.base_subset);
    merge(app, "--master-seed", cfg, "master_seed", a.master_seed);
    merge(app, "--gmca-iters", cfg, "gmca_iters", a.gmca_iters);
    merge(app, "--max-iters", cfg, "max_iters", a.max_iters);
    merge(app, "--sync-model", cfg, "sync_model", a.sync_model);
    merge(app, "--thermal-model", cfg, "thermal_model", a.thermal_model);
    merge(app, "--gauss-model", cfg, "gauss_model", a.gauss_model);

    sgmca::ExperimentConfig config;
    config.sweep = sgmca::sweep_from_string(a.sweep);
    config.grid = a.grid;
    config.subsets = a.subsets;
    config.n_trials = a.trials;
    config.master_seed = a.master_seed;
    config.snr_db = a.snr;
    config.delta = a.delta;
    config.k_ratio = a.k;
    config.models_subset = a.base_subset;
    config.width = a.width;
    config.height = a.height;
    config.channels = a.channels;
    config.gmca_iters = a.gmca_iters;
    config.max_iters = a.max_iters;
    config.n_scales = a.n_scales;
    config.nmf_iters = a.nmf_iters;
    config.k_mad = a.k_mad;
    if (!a.algorithms.empty()) {
        config.algorithms.clear();
        for (const std::string& s : a.algorithms) {
            config.algorithms.push_back(sgmca::algorithm_from_string(s));
        }
    }
    if (config.sweep == sgmca::SweepVariable::models_subset && config.subsets.empty()) {
        for (const sgmca::ModelSubset& s : sgmca::canonical_subsets()) {
            config.subsets.push_back(s.name);
        }
    }

    sgmca::ExperimentContext ctx = sgmca::make_nn_context(config);
    if (!a.nn) {
        sgmca::ProjectionOptions popts;
        popts.max_iters = a.proj_iters;
        auto load = [&](const std::string& path) -> std::shared_ptr<const sgmca::SpectrumPrior> {
            if (path.empty()) return nullptr;
            return std::make_shared<sgmca::IAEPrior>(sgmca::load_model(path), popts);
        };
        ctx.sync_prior = load(a.sync_model);
        ctx.thermal_prior = load(a.thermal_model);
        ctx.gauss_prior = load(a.gauss_model);
    }

    const fs::path dir = output_dir(a.outdir);
    fs::create_directories(dir);

    const std::vector<sgmca::TrialRow> rows = sgmca::run_experiment(config, ctx, &std::cerr);

    std::ofstream trials(dir / "trials.csv");
    trials << sgmca::trial_csv_header(4) << "\n";
    for (const sgmca::TrialRow& row : rows) trials << sgmca::trial_csv_row(row) << "\n";

    std::ofstream runs(dir / "runs.csv");
    runs << "algo,grid,trial,seed,iterations,stop_reason\n";
    for (const sgmca::TrialRow& row : rows) {
        runs << row.algo << "," << row.grid_label << "," << row.trial << "," << row.seed << ","
             << row.iterations << "," << row.stop_reason << "\n";
    }

    std::ofstream agg(dir / "aggregate.csv");
    agg << sgmca::aggregate_csv(sgmca::aggregate(rows, config));

    std::cout << "wrote trials.csv, runs.csv, aggregate.csv to " << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-blind source separation with learned spectral manifolds"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* c_gen = app.add_subcommand("generate", "write synthetic datasets as NPY + manifest");
    c_gen->add_option("--config", gen.config, "JSON config file");
    c_gen->add_option("--output-dir", gen.outdir, "output directory (or SGMCA_OUTPUT_DIR)");
    c_gen->add_option("--seed", gen.seed);
    c_gen->add_option("--width", gen.width);
    c_gen->add_option("--height", gen.height);
    c_gen->add_option("--channels", gen.channels);
    c_gen->add_option("--trials", gen.trials);
    c_gen->add_option("--family-samples", gen.family_samples);
    c_gen->add_option("--snr", gen.snr);
    c_gen->add_option("--delta", gen.delta);
    c_gen->add_option("--k", gen.k);

    TrainArgs train;
    CLI::App* c_train = app.add_subcommand("train-iae", "train a spectral manifold model");
    c_train->add_option("--config", train.config);
    c_train->add_option("--output-dir", train.outdir);
    c_train->add_option("--family", train.family, "gaussian_line | powerlaw | thermal");
    c_train->add_option("--dataset", train.dataset, "NPY of training spectra (overrides --family sampling)");
    c_train->add_option("--channels", train.channels);
    c_train->add_option("--samples", train.samples);
    c_train->add_option("--anchors", train.anchors);
    c_train->add_option("--epochs", train.epochs);
    c_train->add_option("--batch", train.batch);
    c_train->add_option("--layers", train.layers);
    c_train->add_option("--lr", train.lr);
    c_train->add_option("--val-fraction", train.val_fraction);
    c_train->add_option("--seed", train.seed);
    c_train->add_option("--model-out", train.model_out);
    c_train->add_option("--loss-out", train.loss_out);
    c_train->add_flag("--stop-gradient", train.stop_gradient,
                      "ablation: no gradients through the latent solve");

    ProjectArgs proj;
    CLI::App* c_proj = app.add_subcommand("project", "project spectra onto a trained manifold");
    c_proj->add_option("--model", proj.model)->required();
    c_proj->add_option("--input", proj.input)->required();
    c_proj->add_option("--output-dir", proj.outdir);
    c_proj->add_option("--out", proj.out);
    c_proj->add_option("--proj-iters", proj.proj_iters);
    c_proj->add_flag("--fast", proj.fast, "surrogate projection only");

    SeparateArgs sep;
    CLI::App* c_sep = app.add_subcommand("separate", "run one separation and evaluate");
    c_sep->add_option("--config", sep.config);
    c_sep->add_option("--output-dir", sep.outdir);
    c_sep->add_option("--data", sep.data)->required();
    c_sep->add_option("--algo", sep.algo, "sgmca | gmca | hals | snmf");
    c_sep->add_option("--model", sep.models, "IAE model JSON (repeatable)");
    c_sep->add_option("--truth-a", sep.truth_a);
    c_sep->add_option("--truth-s", sep.truth_s);
    c_sep->add_option("--noise", sep.noise);
    c_sep->add_option("--width", sep.width);
    c_sep->add_option("--height", sep.height);
    c_sep->add_option("--sources", sep.n_sources);
    c_sep->add_option("--gmca-iters", sep.gmca_iters);
    c_sep->add_option("--max-iters", sep.max_iters);
    c_sep->add_option("--scales", sep.n_scales);
    c_sep->add_option("--nmf-iters", sep.nmf_iters);
    c_sep->add_option("--proj-iters", sep.proj_iters);
    c_sep->add_option("--k-mad", sep.k_mad);
    c_sep->add_option("--seed", sep.seed);
    c_sep->add_option("--snr", sep.snr);
    c_sep->add_option("--delta", sep.delta);
    c_sep->add_option("--k", sep.k);
    c_sep->add_option("--trial", sep.trial);

    ExperimentArgs exp;
    CLI::App* c_exp = app.add_subcommand("experiment", "Monte-Carlo sweep with aggregation");
    c_exp->add_option("--config", exp.config);
    c_exp->add_option("--output-dir", exp.outdir);
    c_exp->add_option("--sweep", exp.sweep, "snr | delta | k | models_subset");
    c_exp->add_option("--grid", exp.grid, "numeric sweep values");
    c_exp->add_option("--subsets", exp.subsets, "model subsets for the models_subset sweep");
    c_exp->add_option("--algorithms", exp.algorithms);
    c_exp->add_option("--trials", exp.trials);
    c_exp->add_option("--width", exp.width);
    c_exp->add_option("--height", exp.height);
    c_exp->add_option("--channels", exp.channels);
    c_exp->add_option("--snr", exp.snr);
    c_exp->add_option("--delta", exp.delta);
    c_exp->add_option("--k", exp.k);
    c_exp->add_option("--subset", exp.base_subset, "base model subset");
    c_exp->add_option("--master-seed", exp.master_seed);
    c_exp->add_option("--gmca-iters", exp.gmca_iters);
    c_exp->add_option("--max-iters", exp.max_iters);
    c_exp->add_option("--nmf-iters", exp.nmf_iters);
    c_exp->add_option("--proj-iters", exp.proj_iters);
    c_exp->add_option("--k-mad", exp.k_mad);
    c_exp->add_option("--sync-model", exp.sync_model);
    c_exp->add_option("--thermal-model", exp.thermal_model);
    c_exp->add_option("--gauss-model", exp.gauss_model);
    c_exp->add_flag("--nn", exp.nn, "nearest-neighbor dictionary priors instead of IAE models");

    EvaluateArgs ev;
    CLI::App* c_ev = app.add_subcommand("evaluate", "metrics for stored estimates");
    c_ev->add_option("--est-a", ev.est_a)->required();
    c_ev->add_option("--est-s", ev.est_s)->required();
    c_ev->add_option("--true-a", ev.true_a)->required();
    c_ev->add_option("--true-s", ev.true_s)->required();
    c_ev->add_option("--noise", ev.noise);

    try {
        app.parse(argc, argv);
        if (*c_gen) return cmd_generate(*c_gen, gen);
        if (*c_train) return cmd_train_iae(*c_train, train);
        if (*c_proj) return cmd_project(proj);
        if (*c_sep) return cmd_separate(*c_sep, sep);
        if (*c_exp) return cmd_experiment(*c_exp, exp);
        if (*c_ev) return cmd_evaluate(ev);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}
