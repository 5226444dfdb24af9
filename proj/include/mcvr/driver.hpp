#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcvr/attribution.hpp"
#include "mcvr/pairprob.hpp"
#include "mcvr/variance.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mcvr {

// Invalid configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PairprobSection {
    std::size_t family_n = 64;
    std::size_t family_count = 1;
    std::string instance_file;  // overrides the synthetic family when set
    SinkhornOptions sinkhorn;
    bool dump_matrices = false;
};

struct AttributionSection {
    std::vector<std::size_t> budgets = {4, 16, 64, 256, 768};
    std::vector<AttributionScheme> schemes = {AttributionScheme::kIid,
                                              AttributionScheme::kStratGlobal};
    std::size_t trials = 100;
    std::size_t reference_budget = 768;
    std::uint64_t field_seed = 0;
    CorrelationKind correlation = CorrelationKind::kPearson;
};

// Mirrors the config file one-to-one; see README for the schema.
struct ExperimentConfig {
    std::string task_ref = "hier{sigmaA2=1,sigmaB2=4,dim=4}";
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    CostModel cost_model = CostModel::parametric(1.0);
    ConvergenceCriterion criterion;
    std::size_t n_gt = 0;

    // run
    int cell_renders = 1;
    int cell_renoisings = 1;
    std::string cell_method = "uniform";

    // sweep
    std::vector<std::pair<int, int>> grid;
    std::vector<std::string> methods = {"uniform", "iw", "strat", "iw_strat"};
    std::string weight_id = "task";
    int grid_cap = 32;
    std::vector<ParetoPoint> baseline;  // optional explicit ECM baseline
    bool extrapolate = true;

    PairprobSection pairprob;
    AttributionSection attribution;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

// Maps a sweep method name (uniform, iw, strat, iw_strat) onto a spec.
EstimatorSpec method_spec(const std::string& method, int renders, int renoisings,
                          std::uint64_t seed, const std::string& weight_id);

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    unsigned threads = 1;
    std::string format = "csv";
};

// Subcommand entry points; return the process exit code
// (0 success, 2 config error, 3 numerical failure).
int cmd_run(const CliOptions& options);
int cmd_sweep(const CliOptions& options);
int cmd_pairprob(const CliOptions& options);
int cmd_attribution(const CliOptions& options);

}  // namespace mcvr
