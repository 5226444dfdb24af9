#include <string>

#include "CLI11.hpp"

#include "mcvr/driver.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Compute-aware Monte Carlo variance-reduction toolkit"};
    app.require_subcommand(1);

    mcvr::CliOptions options;
    std::uint64_t seed_flag = 0;
    std::string out_flag;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", options.config_path, "experiment config file (JSON)")
            ->required();
        cmd->add_option("--seed", seed_flag, "override the config seed");
        cmd->add_option("--out", out_flag, "override the output directory");
        cmd->add_option("--threads", options.threads, "worker threads (results are invariant to this)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--format", options.format, "table format")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App* run = app.add_subcommand("run", "single-cell variance report");
    CLI::App* sweep = app.add_subcommand("sweep", "variance/ECM/RE sweep over an (R, K) grid");
    CLI::App* pairprob = app.add_subcommand("pairprob", "pair-probability designs and HT variances");
    CLI::App* attribution = app.add_subcommand("attribution", "influence-score budget comparison");
    for (CLI::App* cmd : {run, sweep, pairprob, attribution}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    for (CLI::App* cmd : {run, sweep, pairprob, attribution}) {
        if (!cmd->parsed()) continue;
        if (cmd->count("--seed")) options.seed = seed_flag;
        if (cmd->count("--out")) options.out_dir = out_flag;
    }

    if (run->parsed()) return mcvr::cmd_run(options);
    if (sweep->parsed()) return mcvr::cmd_sweep(options);
    if (pairprob->parsed()) return mcvr::cmd_pairprob(options);
    return mcvr::cmd_attribution(options);
}
