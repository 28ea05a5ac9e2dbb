#include "sgmca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <stdexcept>

#include "sgmca/baselines.hpp"
#include "sgmca/metrics.hpp"

namespace sgmca {

std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::snr: return "snr";
        case SweepVariable::delta: return "delta";
        case SweepVariable::k: return "k";
        case SweepVariable::models_subset: return "models_subset";
    }
    return "?";
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::sgmca: return "sgmca";
        case Algorithm::gmca: return "gmca";
        case Algorithm::hals: return "hals";
        case Algorithm::snmf: return "snmf";
        case Algorithm::nn_benchmark: return "nn_benchmark";
    }
    return "?";
}

SweepVariable sweep_from_string(const std::string& s) {
    if (s == "snr") return SweepVariable::snr;
    if (s == "delta") return SweepVariable::delta;
    if (s == "k") return SweepVariable::k;
    if (s == "models_subset") return SweepVariable::models_subset;
    throw std::invalid_argument("unknown sweep variable: " + s);
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "sgmca") return Algorithm::sgmca;
    if (s == "gmca") return Algorithm::gmca;
    if (s == "hals") return Algorithm::hals;
    if (s == "snmf") return Algorithm::snmf;
    if (s == "nn_benchmark") return Algorithm::nn_benchmark;
    throw std::invalid_argument("unknown algorithm: " + s);
}

std::vector<ModelSubset> canonical_subsets() {
    return {{"all", {0, 1, 2, 3}},
            {"therm_gauss", {1, 2, 3}},
            {"sync_gauss", {0, 2, 3}},
            {"gauss", {2, 3}},
            {"none", {}}};
}

ModelSubset subset_from_string(const std::string& name) {
    for (ModelSubset& s : canonical_subsets()) {
        if (s.name == name) return std::move(s);
    }
    throw std::invalid_argument("unknown model subset: " + name);
}

ExperimentContext make_nn_context(const ExperimentConfig& config, std::size_t dict_size) {
    ExperimentContext ctx;
    ctx.families = default_families(config.channels);
    ctx.templates = gen_templates(config.width, config.height, 4,
                                  derive_seed(config.master_seed, 8, 0));
    auto dict = [&](const SpectrumFamily& fam, std::uint64_t slot) {
        return std::make_shared<NearestNeighborPrior>(
            sample_spectra(fam, dict_size, derive_seed(config.master_seed, 9, slot)));
    };
    ctx.sync_nn = dict(ctx.families.sync, 0);
    ctx.thermal_nn = dict(ctx.families.thermal, 1);
    ctx.gauss_nn = dict(ctx.families.gauss, 2);
    ctx.sync_prior = ctx.sync_nn;
    ctx.thermal_prior = ctx.thermal_nn;
    ctx.gauss_prior = ctx.gauss_nn;
    return ctx;
}

PriorList subset_priors(const ExperimentContext& ctx, const ModelSubset& subset, bool nn) {
    auto pick = [&](std::size_t slot) -> std::shared_ptr<const SpectrumPrior> {
        switch (slot) {
            case 0: return nn ? ctx.sync_nn : ctx.sync_prior;
            case 1: return nn ? ctx.thermal_nn : ctx.thermal_prior;
            case 2:
            case 3: return nn ? ctx.gauss_nn : ctx.gauss_prior;
            default: throw std::invalid_argument("subset_priors: bad slot");
        }
    };
    PriorList list;
    for (std::size_t slot : subset.modeled) {
        auto prior = pick(slot);
        if (!prior) {
            throw std::invalid_argument("subset_priors: no prior available for slot " +
                                        std::to_string(slot));
        }
        list.push_back(std::move(prior));
    }
    return list;
}

TrialRow run_trial(const ExperimentConfig& config, const ExperimentContext& ctx, Algorithm algo,
                   const ModelSubset& subset, const MixtureSpec& spec, std::size_t trial_index) {
    const ExperimentData data =
        build_experiment(spec, ctx.families, ctx.templates, config.width, config.height);

    TrialRow row;
    row.algo = to_string(algo);
    row.trial = trial_index;
    row.seed = spec.seed;
    row.snr = spec.snr_db;
    row.delta = spec.delta;
    row.k = spec.k_ratio;

    Matrix a_est, s_est;
    if (algo == Algorithm::hals || algo == Algorithm::snmf) {
        NmfOptions opts;
        opts.iters = config.nmf_iters;
        opts.seed = derive_seed(spec.seed, 4, 0);
        const NmfResult r = algo == Algorithm::hals ? hals(data.x, 4, opts)
                                                    : snmf(data.x, 4, opts);
        a_est = r.a;
        s_est = r.s;
        row.iterations = config.nmf_iters;
        row.stop_reason = "fixed";
    } else {
        SgmcaOptions opts;
        opts.init.width = config.width;
        opts.init.height = config.height;
        opts.init.n_scales = config.n_scales;
        opts.init.iters = config.gmca_iters;
        opts.init.k_mad = config.k_mad;
        opts.init.seed = derive_seed(spec.seed, 3, 0);
        opts.max_iters = config.max_iters;
        opts.k_mad = config.k_mad;

        PriorList models;
        if (algo == Algorithm::sgmca) {
            models = subset_priors(ctx, subset, false);
        } else if (algo == Algorithm::nn_benchmark) {
            models = subset_priors(ctx, subset, true);
        }  // gmca: empty list — same init and refinement, no manifold constraint

        const SeparationResult r = sgmca(data.x, 4, models, opts);
        a_est = r.a;
        s_est = r.s;
        row.iterations = r.iterations;
        row.stop_reason =
            r.stop_reason == SeparationResult::StopReason::converged ? "converged" : "max_iters";
    }

    const EvalReport rep = evaluate(a_est, s_est, data.a_true, data.s_true, data.n);
    row.sad_overall = rep.sad_overall;
    row.sad = rep.sad_per_spectrum;
    row.sdr = rep.sdr;
    row.sir = rep.sir;
    row.snr_src = rep.snr;
    row.sar = rep.sar;
    return row;
}

std::vector<TrialRow> run_experiment(const ExperimentConfig& config,
                                     const ExperimentContext& ctx, std::ostream* log) {
    const bool subset_sweep = config.sweep == SweepVariable::models_subset;
    const std::size_t n_grid = subset_sweep ? config.subsets.size() : config.grid.size();
    if (n_grid == 0) throw std::invalid_argument("run_experiment: empty sweep grid");
    if (config.n_trials == 0) throw std::invalid_argument("run_experiment: n_trials must be >= 1");

    std::vector<TrialRow> rows;
    rows.reserve(n_grid * config.algorithms.size() * config.n_trials);

    for (std::size_t g = 0; g < n_grid; ++g) {
        MixtureSpec base;
        base.snr_db = config.snr_db;
        base.delta = config.delta;
        base.k_ratio = config.k_ratio;
        ModelSubset subset = subset_from_string(config.models_subset);
        std::string label;
        if (subset_sweep) {
            subset = subset_from_string(config.subsets[g]);
            label = subset.name;
        } else {
            const double v = config.grid[g];
            switch (config.sweep) {
                case SweepVariable::snr: base.snr_db = v; break;
                case SweepVariable::delta: base.delta = v; break;
                case SweepVariable::k: base.k_ratio = v; break;
                case SweepVariable::models_subset: break;
            }
            label = format_fixed(v);
        }

        for (Algorithm algo : config.algorithms) {
            for (std::size_t t = 0; t < config.n_trials; ++t) {
                MixtureSpec spec = base;
                // Same data for every algorithm at a given (grid point, trial).
                spec.seed = derive_seed(config.master_seed, 100 + g, t);
                TrialRow row = run_trial(config, ctx, algo, subset, spec, t);
                row.grid_label = label;
                if (log) {
                    *log << to_string(config.sweep) << "=" << label << " " << row.algo
                         << " trial " << t << ": sad_overall=" << format_fixed(row.sad_overall)
                         << " (" << row.stop_reason << " after " << row.iterations
                         << " iterations)\n";
                }
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

std::string format_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string trial_csv_header(std::size_t n_sources) {
    std::string h = "algo,trial,seed,snr,delta,k,sad_overall";
    const char* groups[] = {"sad", "sdr", "sir", "snr", "sar"};
    for (const char* g : groups) {
        for (std::size_t i = 1; i <= n_sources; ++i) {
            h += "," + std::string(g) + "_" + std::to_string(i);
        }
    }
    return h;
}

std::string trial_csv_row(const TrialRow& row) {
    std::string out = row.algo + "," + std::to_string(row.trial) + "," +
                      std::to_string(row.seed) + "," + format_fixed(row.snr) + "," +
                      format_fixed(row.delta) + "," + format_fixed(row.k) + "," +
                      format_fixed(row.sad_overall);
    for (const std::vector<double>* v : {&row.sad, &row.sdr, &row.sir, &row.snr_src, &row.sar}) {
        for (double x : *v) out += "," + format_fixed(x);
    }
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows,
                                    const ExperimentConfig& config) {
    // Collect per (label, algo, metric); emit in config order for stability
    // regardless of the order rows arrived in.
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> bag;
    std::size_t n_sources = 0;
    for (const TrialRow& row : rows) {
        n_sources = std::max(n_sources, row.sad.size());
        auto& metrics = bag[row.grid_label][row.algo];
        metrics["sad_overall"].push_back(row.sad_overall);
        const char* names[] = {"sad", "sdr", "sir", "snr", "sar"};
        const std::vector<double>* vecs[] = {&row.sad, &row.sdr, &row.sir, &row.snr_src,
                                             &row.sar};
        for (std::size_t gidx = 0; gidx < 5; ++gidx) {
            for (std::size_t i = 0; i < vecs[gidx]->size(); ++i) {
                metrics[std::string(names[gidx]) + "_" + std::to_string(i + 1)].push_back(
                    (*vecs[gidx])[i]);
            }
        }
    }

    std::vector<std::string> labels;
    if (config.sweep == SweepVariable::models_subset) {
        labels = config.subsets;
    } else {
        for (double v : config.grid) labels.push_back(format_fixed(v));
    }
    std::vector<std::string> metric_names{"sad_overall"};
    const char* groups[] = {"sad", "sdr", "sir", "snr", "sar"};
    for (const char* g : groups) {
        for (std::size_t i = 1; i <= n_sources; ++i) {
            metric_names.push_back(std::string(g) + "_" + std::to_string(i));
        }
    }

    std::vector<AggregateRow> out;
    for (const std::string& label : labels) {
        for (Algorithm algo : config.algorithms) {
            const std::string algo_name = to_string(algo);
            auto lit = bag.find(label);
            if (lit == bag.end()) continue;
            auto ait = lit->second.find(algo_name);
            if (ait == lit->second.end()) continue;
            for (const std::string& metric : metric_names) {
                auto mit = ait->second.find(metric);
                if (mit == ait->second.end()) continue;
                AggregateRow r;
                r.sweep = to_string(config.sweep);
                r.value = label;
                r.algo = algo_name;
                r.metric = metric;
                r.median = quantile(mit->second, 0.5);
                r.q1 = quantile(mit->second, 0.25);
                r.q3 = quantile(mit->second, 0.75);
                out.push_back(std::move(r));
            }
        }
    }
    return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "sweep,value,algo,metric,median,q1,q3\n";
    for (const AggregateRow& r : rows) {
        out += r.sweep + "," + r.value + "," + r.algo + "," + r.metric + "," +
               format_fixed(r.median) + "," + format_fixed(r.q1) + "," + format_fixed(r.q3) +
               "\n";
    }
    return out;
}

} // namespace sgmca
