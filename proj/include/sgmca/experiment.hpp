#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "sgmca/matrix.hpp"
#include "sgmca/separation.hpp"
#include "sgmca/synthdata.hpp"

namespace sgmca {

enum class SweepVariable { snr, delta, k, models_subset };
enum class Algorithm { sgmca, gmca, hals, snmf, nn_benchmark };

std::string to_string(SweepVariable v);
std::string to_string(Algorithm a);
SweepVariable sweep_from_string(const std::string& s);
Algorithm algorithm_from_string(const std::string& s);

/// Which of the four protocol sources carry a model in an sgmca run. Slots:
/// 0 = synchrotron, 1 = thermal, 2 and 3 = the two Gaussian lines.
struct ModelSubset {
    std::string name;
    std::vector<std::size_t> modeled;
};

/// all, therm_gauss, sync_gauss, gauss, none — the Table-3 column structure.
std::vector<ModelSubset> canonical_subsets();
ModelSubset subset_from_string(const std::string& name);

struct ExperimentConfig {
    SweepVariable sweep = SweepVariable::snr;
    std::vector<double> grid;            // numeric sweep values
    std::vector<std::string> subsets;    // models_subset sweep values
    std::size_t n_trials = 10;
    std::vector<Algorithm> algorithms{Algorithm::sgmca, Algorithm::gmca};
    std::uint64_t master_seed = 0;

    // Base mixture parameters (the swept one is overridden per grid point).
    double snr_db = 40.0;
    double delta = 20.0;
    double k_ratio = 1.0;
    std::string models_subset = "all";

    std::size_t width = 64, height = 64, channels = 40;
    std::size_t gmca_iters = 100, max_iters = 50, n_scales = 3, nmf_iters = 500;
    double k_mad = 3.0;
};

/// Everything a trial needs besides its seed: families, templates, and the
/// priors for each family slot (trained models for sgmca, dictionaries for
/// the nearest-neighbor benchmark).
struct ExperimentContext {
    ExperimentFamilies families;
    Matrix templates;
    std::shared_ptr<const SpectrumPrior> sync_prior, thermal_prior, gauss_prior;
    std::shared_ptr<const SpectrumPrior> sync_nn, thermal_nn, gauss_nn;
};

/// Context whose sgmca priors are nearest-neighbor dictionaries sampled from
/// the families — runs without any trained model.
ExperimentContext make_nn_context(const ExperimentConfig& config, std::size_t dict_size = 200);

/// Prior list for a subset; `nn` switches to the dictionary priors.
PriorList subset_priors(const ExperimentContext& ctx, const ModelSubset& subset, bool nn);

struct TrialRow {
    std::string algo;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double snr = 0.0, delta = 0.0, k = 1.0;
    std::string grid_label;
    double sad_overall = 0.0;
    std::vector<double> sad, sdr, sir, snr_src, sar;  // per source
    std::size_t iterations = 0;
    std::string stop_reason;  // converged | max_iters | fixed (NMF baselines)
};

TrialRow run_trial(const ExperimentConfig& config, const ExperimentContext& ctx, Algorithm algo,
                   const ModelSubset& subset, const MixtureSpec& spec, std::size_t trial_index);

/// Full sweep: grid points x algorithms x trials, serially, in deterministic
/// order. Per-trial seeds derive from (master_seed, grid index, trial index)
/// so every algorithm sees the same data at the same grid point and trial.
std::vector<TrialRow> run_experiment(const ExperimentConfig& config,
                                     const ExperimentContext& ctx, std::ostream* log);

// --- tabular output -------------------------------------------------------

/// 6-decimal fixed point, the project-wide CSV number format.
std::string format_fixed(double v);

std::string trial_csv_header(std::size_t n_sources);
std::string trial_csv_row(const TrialRow& row);

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

struct AggregateRow {
    std::string sweep;
    std::string value;
    std::string algo;
    std::string metric;
    double median = 0.0, q1 = 0.0, q3 = 0.0;
};

/// One row per (grid value, algorithm, metric); row order follows the config's
/// grid/algorithm order, independent of the order trials completed in.
std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows,
                                    const ExperimentConfig& config);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

} // namespace sgmca
