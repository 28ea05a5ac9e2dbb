#include <doctest.h>

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgmca/experiment.hpp"

using namespace sgmca;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig config;
    config.sweep = SweepVariable::snr;
    config.grid = {40.0};
    config.n_trials = 2;
    config.algorithms = {Algorithm::gmca, Algorithm::hals};
    config.master_seed = 7;
    config.width = 16;
    config.height = 16;
    config.channels = 12;
    config.delta = 4.0;
    config.gmca_iters = 5;
    config.max_iters = 3;
    config.nmf_iters = 10;
    return config;
}

TrialRow make_row(const std::string& algo, const std::string& label, double sad_overall) {
    TrialRow row;
    row.algo = algo;
    row.grid_label = label;
    row.sad_overall = sad_overall;
    row.sad = {sad_overall, sad_overall};
    row.sdr = {1.0, 2.0};
    row.sir = {3.0, 4.0};
    row.snr_src = {5.0, 6.0};
    row.sar = {7.0, 8.0};
    return row;
}

} // namespace

// ---------------------------------------------------------------------------
// name round trips
// ---------------------------------------------------------------------------

TEST_CASE("sweep and algorithm names round-trip through their parsers") {
    for (SweepVariable v : {SweepVariable::snr, SweepVariable::delta, SweepVariable::k,
                            SweepVariable::models_subset}) {
        CHECK(sweep_from_string(to_string(v)) == v);
    }
    for (Algorithm a : {Algorithm::sgmca, Algorithm::gmca, Algorithm::hals, Algorithm::snmf,
                        Algorithm::nn_benchmark}) {
        CHECK(algorithm_from_string(to_string(a)) == a);
    }
    CHECK_THROWS_AS(sweep_from_string("speed"), std::invalid_argument);
    CHECK_THROWS_AS(algorithm_from_string("pca"), std::invalid_argument);
}

TEST_CASE("the canonical subsets follow the five-column structure") {
    const std::vector<ModelSubset> subsets = canonical_subsets();
    REQUIRE(subsets.size() == 5);
    CHECK(subsets[0].name == "all");
    CHECK(subsets[0].modeled == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(subsets[1].name == "therm_gauss");
    CHECK(subsets[1].modeled == std::vector<std::size_t>{1, 2, 3});
    CHECK(subsets[2].name == "sync_gauss");
    CHECK(subsets[2].modeled == std::vector<std::size_t>{0, 2, 3});
    CHECK(subsets[3].name == "gauss");
    CHECK(subsets[3].modeled == std::vector<std::size_t>{2, 3});
    CHECK(subsets[4].name == "none");
    CHECK(subsets[4].modeled.empty());
    CHECK(subset_from_string("gauss").modeled.size() == 2);
    CHECK_THROWS_AS(subset_from_string("everything"), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// tabular output
// ---------------------------------------------------------------------------

TEST_CASE("numbers are formatted as 6-decimal fixed point") {
    CHECK(format_fixed(1.5) == "1.500000");
    CHECK(format_fixed(-0.125) == "-0.125000");
    CHECK(format_fixed(0.0) == "0.000000");
    CHECK(format_fixed(120.0) == "120.000000");
}

TEST_CASE("the trial CSV header is exactly the pinned schema") {
    CHECK(trial_csv_header(4) ==
          "algo,trial,seed,snr,delta,k,sad_overall,"
          "sad_1,sad_2,sad_3,sad_4,"
          "sdr_1,sdr_2,sdr_3,sdr_4,"
          "sir_1,sir_2,sir_3,sir_4,"
          "snr_1,snr_2,snr_3,snr_4,"
          "sar_1,sar_2,sar_3,sar_4");
    CHECK(trial_csv_header(2) ==
          "algo,trial,seed,snr,delta,k,sad_overall,sad_1,sad_2,sdr_1,sdr_2,"
          "sir_1,sir_2,snr_1,snr_2,sar_1,sar_2");
}

TEST_CASE("a trial row renders its fields in header order") {
    TrialRow row = make_row("gmca", "40.000000", 12.5);
    row.trial = 3;
    row.seed = 987654321;
    row.snr = 40.0;
    row.delta = 20.0;
    row.k = 1.0;
    CHECK(trial_csv_row(row) ==
          "gmca,3,987654321,40.000000,20.000000,1.000000,12.500000,"
          "12.500000,12.500000,1.000000,2.000000,3.000000,4.000000,"
          "5.000000,6.000000,7.000000,8.000000");
}

// ---------------------------------------------------------------------------
// quantile
// ---------------------------------------------------------------------------

TEST_CASE("linear-interpolation quantiles match hand values") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};  // unsorted on purpose
    CHECK(quantile(v, 0.5) == 2.5);
    CHECK(quantile(v, 0.25) == 1.75);
    CHECK(quantile(v, 0.75) == 3.25);
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile({5.0}, 0.5) == 5.0);
    CHECK(quantile({1.0, 2.0, 3.0}, 0.5) == 2.0);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(quantile(v, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(quantile(v, 1.1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

TEST_CASE("aggregation reduces trials to medians and quartiles in config order") {
    ExperimentConfig config;
    config.sweep = SweepVariable::snr;
    config.grid = {40.0};
    config.algorithms = {Algorithm::sgmca, Algorithm::gmca};

    std::vector<TrialRow> rows;
    // feed rows out of algorithm order: aggregation must not care
    for (double v : {10.0, 30.0, 20.0, 40.0}) rows.push_back(make_row("gmca", "40.000000", v));
    for (double v : {15.0, 25.0, 35.0, 45.0}) rows.push_back(make_row("sgmca", "40.000000", v));

    const std::vector<AggregateRow> agg = aggregate(rows, config);
    REQUIRE(!agg.empty());

    // config lists sgmca first, so its rows come first
    CHECK(agg.front().algo == "sgmca");
    CHECK(agg.front().metric == "sad_overall");
    CHECK(agg.front().sweep == "snr");
    CHECK(agg.front().value == "40.000000");
    CHECK(agg.front().median == 30.0);
    CHECK(agg.front().q1 == 22.5);
    CHECK(agg.front().q3 == 37.5);

    std::map<std::string, AggregateRow> by_key;
    for (const AggregateRow& r : agg) by_key[r.algo + "/" + r.metric] = r;
    CHECK(by_key.at("gmca/sad_overall").median == 25.0);
    CHECK(by_key.at("gmca/sad_overall").q1 == 17.5);
    CHECK(by_key.at("gmca/sad_overall").q3 == 32.5);
    // per-source metrics aggregate too (constant across these rows)
    CHECK(by_key.at("sgmca/sdr_1").median == 1.0);
    CHECK(by_key.at("sgmca/sar_2").median == 8.0);

    const std::string csv = aggregate_csv(agg);
    CHECK(csv.rfind("sweep,value,algo,metric,median,q1,q3\n", 0) == 0);
    CHECK(csv.find("snr,40.000000,sgmca,sad_overall,30.000000,22.500000,37.500000\n") !=
          std::string::npos);
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

TEST_CASE("a tiny sweep runs deterministically with shared per-trial seeds") {
    const ExperimentConfig config = tiny_config();
    const ExperimentContext ctx = make_nn_context(config, 20);

    std::ostringstream log;
    const std::vector<TrialRow> rows = run_experiment(config, ctx, &log);
    REQUIRE(rows.size() == 4);  // 1 grid point x 2 algorithms x 2 trials

    // every algorithm sees the same data at a given (grid point, trial)
    std::map<std::size_t, std::uint64_t> seed_of_trial;
    for (const TrialRow& row : rows) {
        auto [it, inserted] = seed_of_trial.try_emplace(row.trial, row.seed);
        if (!inserted) CHECK(it->second == row.seed);
    }
    CHECK(seed_of_trial.size() == 2);
    CHECK(seed_of_trial.at(0) != seed_of_trial.at(1));

    for (const TrialRow& row : rows) {
        if (row.algo == "hals") {
            CHECK(row.stop_reason == "fixed");
            CHECK(row.iterations == config.nmf_iters);
        } else {
            const bool known =
                row.stop_reason == "converged" || row.stop_reason == "max_iters";
            CHECK(known);
            CHECK(row.iterations <= config.max_iters);
        }
        CHECK(row.snr == 40.0);
        REQUIRE(row.sad.size() == 4);
    }
    CHECK(!log.str().empty());

    // end-to-end determinism: the rerun renders identical CSV rows
    const std::vector<TrialRow> again = run_experiment(config, ctx, nullptr);
    REQUIRE(again.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(trial_csv_row(rows[i]) == trial_csv_row(again[i]));
    }
}

TEST_CASE("a models_subset sweep labels rows by subset name") {
    ExperimentConfig config = tiny_config();
    config.sweep = SweepVariable::models_subset;
    config.subsets = {"none", "gauss"};
    config.n_trials = 1;
    config.algorithms = {Algorithm::nn_benchmark};
    const ExperimentContext ctx = make_nn_context(config, 20);

    const std::vector<TrialRow> rows = run_experiment(config, ctx, nullptr);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].grid_label == "none");
    CHECK(rows[1].grid_label == "gauss");
    // the two grid points draw different data
    CHECK(rows[0].seed != rows[1].seed);

    const std::vector<AggregateRow> agg = aggregate(rows, config);
    REQUIRE(!agg.empty());
    CHECK(agg.front().sweep == "models_subset");
    CHECK(agg.front().value == "none");
}

TEST_CASE("run_experiment validates its configuration") {
    ExperimentConfig config = tiny_config();
    const ExperimentContext ctx = make_nn_context(config, 10);
    config.grid.clear();
    CHECK_THROWS_AS(run_experiment(config, ctx, nullptr), std::invalid_argument);
    config.grid = {40.0};
    config.n_trials = 0;
    CHECK_THROWS_AS(run_experiment(config, ctx, nullptr), std::invalid_argument);
}

TEST_CASE("subset_priors sizes follow the subset and missing priors throw") {
    const ExperimentConfig config = tiny_config();
    const ExperimentContext ctx = make_nn_context(config, 10);
    CHECK(subset_priors(ctx, subset_from_string("all"), false).size() == 4);
    CHECK(subset_priors(ctx, subset_from_string("gauss"), true).size() == 2);
    CHECK(subset_priors(ctx, subset_from_string("none"), false).empty());

    ExperimentContext bare;
    bare.families = ctx.families;
    bare.templates = ctx.templates;
    CHECK_THROWS_AS(subset_priors(bare, subset_from_string("all"), false),
                    std::invalid_argument);
}
