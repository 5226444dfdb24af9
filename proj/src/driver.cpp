#include "mcvr/driver.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mcvr/parallel.hpp"
#include "mcvr/testbed.hpp"

namespace mcvr {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    return mix64(mix64(mix64(seed + 0x9e3779b97f4a7c15ULL) + 0x9e3779b97f4a7c15ULL * (tag + 1)) +
                 index * 0xda942042e4dd58b5ULL);
}

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

// Single atomic write: everything lands at once or not at all.
void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json cost_model_to_json(const CostModel& model) {
    if (model.is_parametric()) return nlohmann::json{{"alpha", model.alpha()}};
    return nlohmann::json{{"measured", true}};
}

CostModel cost_model_from_json(const nlohmann::json& doc) {
    if (doc.contains("alpha")) return CostModel::parametric(doc.at("alpha").get<double>());
    if (doc.contains("measured")) {
        std::map<std::pair<int, int>, double> table;
        for (const auto& row : doc.at("measured")) {
            if (!row.is_array() || row.size() != 3)
                throw ConfigError("measured cost entries must be [R, K, cost] triples");
            table[{row[0].get<int>(), row[1].get<int>()}] = row[2].get<double>();
        }
        return CostModel::measured(std::move(table));
    }
    throw ConfigError("cost model must supply 'alpha' or 'measured'");
}

nlohmann::json criterion_to_json(const ConvergenceCriterion& criterion) {
    return nlohmann::json{{"warmup", criterion.warmup},
                          {"interval", criterion.interval},
                          {"rel_tol", criterion.rel_tol},
                          {"consecutive", criterion.consecutive},
                          {"cap", criterion.cap}};
}

CorrelationKind correlation_from_name(const std::string& name) {
    if (name == "pearson") return CorrelationKind::kPearson;
    if (name == "spearman") return CorrelationKind::kSpearman;
    throw ConfigError("unknown correlation kind '" + name + "'");
}

AttributionScheme scheme_from_name(const std::string& name) {
    if (name == "iid") return AttributionScheme::kIid;
    if (name == "strat_global") return AttributionScheme::kStratGlobal;
    throw ConfigError("unknown attribution scheme '" + name + "'");
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& doc) {
    ExperimentConfig config;
    try {
        if (doc.contains("task")) config.task_ref = doc.at("task").get<std::string>();
        if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("out")) config.out_dir = doc.at("out").get<std::string>();
        if (doc.contains("cost")) config.cost_model = cost_model_from_json(doc.at("cost"));
        if (doc.contains("criterion")) {
            const auto& c = doc.at("criterion");
            if (c.contains("warmup")) config.criterion.warmup = c.at("warmup").get<std::size_t>();
            if (c.contains("interval")) config.criterion.interval = c.at("interval").get<std::size_t>();
            if (c.contains("rel_tol")) config.criterion.rel_tol = c.at("rel_tol").get<double>();
            if (c.contains("consecutive"))
                config.criterion.consecutive = c.at("consecutive").get<std::size_t>();
            if (c.contains("cap")) config.criterion.cap = c.at("cap").get<std::size_t>();
        }
        if (doc.contains("n_gt")) config.n_gt = doc.at("n_gt").get<std::size_t>();

        if (doc.contains("cell")) {
            const auto& cell = doc.at("cell");
            config.cell_renders = cell.at("R").get<int>();
            config.cell_renoisings = cell.at("K").get<int>();
            if (cell.contains("method")) config.cell_method = cell.at("method").get<std::string>();
        }

        if (doc.contains("grid")) {
            for (const auto& row : doc.at("grid")) {
                if (!row.is_array() || row.size() != 2)
                    throw ConfigError("grid entries must be [R, K] pairs");
                config.grid.emplace_back(row[0].get<int>(), row[1].get<int>());
            }
        }
        if (doc.contains("methods"))
            config.methods = doc.at("methods").get<std::vector<std::string>>();
        if (doc.contains("weight")) config.weight_id = doc.at("weight").get<std::string>();
        if (doc.contains("cap")) config.grid_cap = doc.at("cap").get<int>();
        if (doc.contains("extrapolate")) config.extrapolate = doc.at("extrapolate").get<bool>();
        if (doc.contains("baseline")) {
            for (const auto& row : doc.at("baseline")) {
                if (!row.is_array() || row.size() != 2)
                    throw ConfigError("baseline entries must be [cost, variance] pairs");
                config.baseline.push_back({row[0].get<double>(), row[1].get<double>()});
            }
        }

        if (doc.contains("pairprob")) {
            const auto& pp = doc.at("pairprob");
            if (pp.contains("family")) {
                const auto& fam = pp.at("family");
                if (fam.contains("n")) config.pairprob.family_n = fam.at("n").get<std::size_t>();
                if (fam.contains("count"))
                    config.pairprob.family_count = fam.at("count").get<std::size_t>();
            }
            if (pp.contains("instance_file"))
                config.pairprob.instance_file = pp.at("instance_file").get<std::string>();
            if (pp.contains("beta")) config.pairprob.sinkhorn.beta = pp.at("beta").get<double>();
            if (pp.contains("max_iters"))
                config.pairprob.sinkhorn.max_iters = pp.at("max_iters").get<std::size_t>();
            if (pp.contains("tol")) config.pairprob.sinkhorn.tol = pp.at("tol").get<double>();
            if (pp.contains("dump_matrices"))
                config.pairprob.dump_matrices = pp.at("dump_matrices").get<bool>();
        }

        if (doc.contains("attribution")) {
            const auto& at = doc.at("attribution");
            if (at.contains("budgets"))
                config.attribution.budgets = at.at("budgets").get<std::vector<std::size_t>>();
            if (at.contains("schemes")) {
                config.attribution.schemes.clear();
                for (const auto& name : at.at("schemes"))
                    config.attribution.schemes.push_back(scheme_from_name(name.get<std::string>()));
            }
            if (at.contains("trials")) config.attribution.trials = at.at("trials").get<std::size_t>();
            if (at.contains("reference_budget"))
                config.attribution.reference_budget = at.at("reference_budget").get<std::size_t>();
            if (at.contains("field_seed"))
                config.attribution.field_seed = at.at("field_seed").get<std::uint64_t>();
            if (at.contains("correlation"))
                config.attribution.correlation =
                    correlation_from_name(at.at("correlation").get<std::string>());
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(doc);
}

EstimatorSpec method_spec(const std::string& method, int renders, int renoisings,
                          std::uint64_t seed, const std::string& weight_id) {
    EstimatorSpec spec;
    spec.renders = renders;
    spec.renoisings = renoisings;
    spec.seed = seed;
    if (method == "uniform") {
        spec.mode = TimestepMode::base();
        spec.allocation = Allocation::kIid;
    } else if (method == "iw") {
        spec.mode = TimestepMode::proposal(weight_id);
        spec.allocation = Allocation::kIid;
    } else if (method == "strat") {
        spec.mode = TimestepMode::base();
        spec.allocation = Allocation::kStratPerRender;
    } else if (method == "iw_strat") {
        spec.mode = TimestepMode::proposal(weight_id);
        spec.allocation = Allocation::kStratPerRender;
    } else if (method == "strat_global") {
        spec.mode = TimestepMode::base();
        spec.allocation = Allocation::kStratGlobal;
    } else {
        throw ConfigError("unknown method '" + method + "'");
    }
    return spec;
}

namespace {

struct LoadedConfig {
    ExperimentConfig config;
    Task task;
};

LoadedConfig prepare(const CliOptions& options, bool needs_task) {
    ExperimentConfig config = load_config(options.config_path);
    if (options.seed) config.seed = *options.seed;
    if (options.out_dir) config.out_dir = *options.out_dir;
    LoadedConfig loaded{std::move(config), Task{}};
    if (needs_task) {
        try {
            loaded.task = make_task(loaded.config.task_ref);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        loaded.task.cost_model = loaded.config.cost_model;
    }
    return loaded;
}

struct SweepRow {
    std::string method;
    int renders = 0;
    int renoisings = 0;
    double cost = 0.0;
    double variance = 0.0;
    std::optional<double> ecm;
    std::optional<double> re;
};

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "method,R,K,cost,variance,ecm,re\n";
    for (const auto& row : rows) {
        out << row.method << ',' << row.renders << ',' << row.renoisings << ','
            << format_double(row.cost) << ',' << format_double(row.variance) << ','
            << (row.ecm ? format_double(*row.ecm) : "") << ','
            << (row.re ? format_double(*row.re) : "") << '\n';
    }
    return out.str();
}

int run_guarded(const char* what, const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << what << ": config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << what << ": " << e.what() << '\n';
        return 3;
    }
}

}  // namespace

int cmd_run(const CliOptions& options) {
    return run_guarded("run", [&] {
        const LoadedConfig loaded = prepare(options, true);
        const ExperimentConfig& config = loaded.config;
        EstimatorSpec spec;
        try {
            spec = method_spec(config.cell_method, config.cell_renders, config.cell_renoisings,
                               config.seed, config.weight_id);
            spec.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        const VarianceReport report =
            run_until_converged(loaded.task, spec, config.criterion, options.threads);

        nlohmann::json doc = report_to_json(report);
        doc["task"] = config.task_ref;
        doc["spec"] = spec_to_json(spec);
        if (spec.degenerate_stratification())
            doc["warnings"] = {"per-render stratification with K = 1 degenerates to IID"};
        if (config.n_gt > 0) {
            EstimatorSpec ref_spec = spec;
            ref_spec.seed = derive_seed(config.seed, kTagReference, 0);
            doc["reference_mean"] = reference_mean(loaded.task, ref_spec, config.n_gt,
                                                   options.threads, report.samples);
        }
        write_file(std::filesystem::path(config.out_dir) / "report.json", doc.dump(2) + "\n");
    });
}

int cmd_sweep(const CliOptions& options) {
    return run_guarded("sweep", [&] {
        const LoadedConfig loaded = prepare(options, true);
        const ExperimentConfig& config = loaded.config;
        if (config.grid.empty()) throw ConfigError("sweep grid is empty");
        if (config.methods.empty()) throw ConfigError("sweep methods list is empty");
        for (const auto& [renders, renoisings] : config.grid) {
            if (renders < 1 || renoisings < 1) throw ConfigError("grid entries must be positive");
            if (static_cast<long>(renders) * renoisings > config.grid_cap)
                throw ConfigError("grid entry exceeds R*K cap of " + std::to_string(config.grid_cap));
        }

        struct Job {
            std::size_t cell = 0;
            std::string method;
            EstimatorSpec spec;
        };
        std::vector<Job> jobs;
        std::vector<std::uint64_t> cell_seeds;
        for (std::size_t cell = 0; cell < config.grid.size(); ++cell) {
            cell_seeds.push_back(derive_seed(config.seed, kTagCell, cell));
            for (const auto& method : config.methods) {
                jobs.push_back({cell, method,
                                method_spec(method, config.grid[cell].first,
                                            config.grid[cell].second, cell_seeds[cell],
                                            config.weight_id)});
            }
        }

        // Cells run in parallel; each job is single-threaded so the results
        // never depend on the thread budget.
        std::vector<VarianceReport> reports(jobs.size());
        parallel_for_index(jobs.size(), options.threads, [&](std::size_t i) {
            reports[i] = run_until_converged(loaded.task, jobs[i].spec, config.criterion, 1);
        });

        std::vector<SweepRow> rows(jobs.size());
        std::map<std::pair<int, int>, double> uniform_variance;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            rows[i].method = jobs[i].method;
            rows[i].renders = jobs[i].spec.renders;
            rows[i].renoisings = jobs[i].spec.renoisings;
            rows[i].cost = loaded.task.cost_model.cost(rows[i].renders, rows[i].renoisings);
            rows[i].variance = reports[i].trace_cov;
            if (jobs[i].method == "uniform")
                uniform_variance[{rows[i].renders, rows[i].renoisings}] = rows[i].variance;
        }

        std::vector<std::string> warnings;
        std::vector<ParetoPoint> baseline_points = config.baseline;
        if (baseline_points.empty()) {
            // Default anchor: the sweep's own uniform K = 1 rows.
            for (const auto& row : rows)
                if (row.method == "uniform" && row.renoisings == 1 && row.variance > 0.0)
                    baseline_points.push_back({row.cost, row.variance});
        }
        std::optional<ParetoCurve> curve;
        if (!baseline_points.empty())
            curve = pareto_baseline(baseline_points);
        else
            warnings.push_back("no baseline points available; ECM column left empty");

        for (auto& row : rows) {
            if (curve && row.variance > 0.0) {
                try {
                    row.ecm = ecm({row.cost, row.variance}, *curve, config.extrapolate);
                } catch (const std::out_of_range&) {
                    warnings.push_back("iso-variance point unreachable for " + row.method + " (" +
                                       std::to_string(row.renders) + "," +
                                       std::to_string(row.renoisings) + ")");
                }
            }
            const auto uniform_it = uniform_variance.find({row.renders, row.renoisings});
            if (uniform_it != uniform_variance.end() && row.variance > 0.0)
                row.re = relative_efficiency(uniform_it->second, row.variance);
        }
        for (std::size_t i = 0; i < jobs.size(); ++i)
            if (jobs[i].spec.degenerate_stratification() && jobs[i].method == "strat")
                warnings.push_back("per-render stratification with K = 1 degenerates to IID at cell (" +
                                   std::to_string(jobs[i].spec.renders) + ",1)");
        for (const auto& warning : warnings) std::cerr << "sweep: warning: " << warning << '\n';

        nlohmann::json manifest{{"task", config.task_ref},
                                {"seed", config.seed},
                                {"cell_seeds", cell_seeds},
                                {"criterion", criterion_to_json(config.criterion)},
                                {"cost", cost_model_to_json(config.cost_model)},
                                {"methods", config.methods},
                                {"weight", config.weight_id},
                                {"ecm_anchor", "method_variance"},
                                {"extrapolate", config.extrapolate},
                                {"warnings", warnings}};
        manifest["grid"] = nlohmann::json::array();
        for (const auto& [renders, renoisings] : config.grid)
            manifest["grid"].push_back({renders, renoisings});
        if (curve) {
            manifest["baseline"] = nlohmann::json::array();
            for (const auto& point : curve->points)
                manifest["baseline"].push_back({point.cost, point.variance});
        }

        const std::filesystem::path out(config.out_dir);
        if (options.format == "json") {
            nlohmann::json table = nlohmann::json::array();
            for (const auto& row : rows) {
                nlohmann::json entry{{"method", row.method}, {"R", row.renders},
                                     {"K", row.renoisings}, {"cost", row.cost},
                                     {"variance", row.variance}};
                entry["ecm"] = row.ecm ? nlohmann::json(*row.ecm) : nlohmann::json();
                entry["re"] = row.re ? nlohmann::json(*row.re) : nlohmann::json();
                table.push_back(entry);
            }
            write_file(out / "sweep.json", table.dump(2) + "\n");
        } else {
            write_file(out / "sweep.csv", sweep_csv(rows));
        }
        write_file(out / "manifest.json", manifest.dump(2) + "\n");
    });
}

namespace {

PairInstance instance_from_json(const nlohmann::json& doc) {
    PairInstance instance;
    instance.y = doc.at("y").get<std::vector<std::vector<double>>>();
    if (doc.contains("timesteps"))
        instance.timesteps = doc.at("timesteps").get<std::vector<double>>();
    if (doc.contains("weights")) instance.weights = doc.at("weights").get<std::vector<double>>();
    instance.validate();
    return instance;
}

std::string matrix_csv(const PairMatrix& matrix) {
    std::ostringstream out;
    for (std::size_t i = 0; i < matrix.n; ++i) {
        for (std::size_t j = 0; j < matrix.n; ++j) {
            if (j) out << ',';
            out << format_double(matrix.at(i, j));
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace

int cmd_pairprob(const CliOptions& options) {
    return run_guarded("pairprob", [&] {
        const LoadedConfig loaded = prepare(options, false);
        const ExperimentConfig& config = loaded.config;
        const PairprobSection& section = config.pairprob;

        std::vector<PairInstance> instances;
        if (!section.instance_file.empty()) {
            std::ifstream in(section.instance_file);
            if (!in) throw ConfigError("cannot open instance file '" + section.instance_file + "'");
            nlohmann::json doc;
            try {
                in >> doc;
                instances.push_back(instance_from_json(doc));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("bad instance file: ") + e.what());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else {
            if (section.family_count == 0) throw ConfigError("pairprob family count must be positive");
            for (std::size_t i = 0; i < section.family_count; ++i)
                instances.push_back(make_pair_family_instance(
                    section.family_n, derive_seed(config.seed, kTagInstance, i)));
        }

        const std::vector<PairKind> kinds = {PairKind::kIid, PairKind::kStratIndex, PairKind::kIw,
                                             PairKind::kIwStrat, PairKind::kSinkhorn};
        nlohmann::json instances_doc = nlohmann::json::array();
        std::size_t ordering_ok = 0;
        std::map<std::string, PairMatrix> first_matrices;
        for (std::size_t idx = 0; idx < instances.size(); ++idx) {
            const PairInstance& instance = instances[idx];
            nlohmann::json results = nlohmann::json::array();
            std::map<std::string, double> variances;
            for (const PairKind kind : kinds) {
                const std::string name = pair_kind_name(kind);
                try {
                    const PairMatrix matrix = kind == PairKind::kSinkhorn
                                                  ? sinkhorn_optimal(instance, section.sinkhorn)
                                                  : build_pair_matrix(kind, instance);
                    const double variance = ht_variance(instance, matrix);
                    variances[name] = variance;
                    const double ecm_vs_iid =
                        variances.count("iid") && variance > 0.0 ? variances["iid"] / variance : 1.0;
                    results.push_back(pair_matrix_to_json(matrix, name, variance, ecm_vs_iid));
                    if (idx == 0) first_matrices.emplace(name, matrix);
                } catch (const SinkhornError& e) {
                    // Row-level failure; the remaining kinds still report.
                    results.push_back({{"kind", name}, {"error", e.what()}, {"residual", e.residual}});
                }
            }
            const bool ok = variances.count("sinkhorn") && variances.count("iw_strat") &&
                            variances.count("iid") &&
                            variances["sinkhorn"] <= variances["iw_strat"] + 1e-15 &&
                            variances["iw_strat"] <= variances["iid"] + 1e-15;
            if (ok) ++ordering_ok;
            instances_doc.push_back({{"index", idx}, {"results", results}, {"ordering_ok", ok}});
        }

        nlohmann::json doc{{"seed", config.seed},
                           {"instances", instances_doc},
                           {"summary",
                            {{"count", instances.size()},
                             {"ordering_fraction",
                              static_cast<double>(ordering_ok) / static_cast<double>(instances.size())}}}};
        const std::filesystem::path out(config.out_dir);
        write_file(out / "pairprob.json", doc.dump(2) + "\n");
        if (section.dump_matrices || options.format == "csv") {
            for (const auto& [name, matrix] : first_matrices)
                write_file(out / ("matrix_" + name + ".csv"), matrix_csv(matrix));
        }
    });
}

int cmd_attribution(const CliOptions& options) {
    return run_guarded("attribution", [&] {
        const LoadedConfig loaded = prepare(options, false);
        const ExperimentConfig& config = loaded.config;
        const AttributionSection& section = config.attribution;
        if (section.budgets.empty() || section.schemes.empty())
            throw ConfigError("attribution needs budgets and schemes");
        if (section.trials == 0) throw ConfigError("attribution trials must be positive");

        const GradientField field = default_gradient_field(section.field_seed);
        AttributionConfig attribution_config;
        attribution_config.reference_budget = section.reference_budget;
        attribution_config.trials = section.trials;
        attribution_config.seed = config.seed;
        attribution_config.correlation = section.correlation;

        struct Combo {
            std::size_t budget;
            AttributionScheme scheme;
        };
        std::vector<Combo> combos;
        for (const auto scheme : section.schemes)
            for (const auto budget : section.budgets) combos.push_back({budget, scheme});

        std::vector<InfluenceReport> reports(combos.size());
        parallel_for_index(combos.size(), options.threads, [&](std::size_t i) {
            reports[i] = attribution_experiment(field, combos[i].budget, combos[i].scheme,
                                                attribution_config);
        });

        std::ostringstream csv;
        csv << "example_id,score,budget,scheme,trial\n";
        nlohmann::json summary = nlohmann::json::array();
        for (std::size_t i = 0; i < combos.size(); ++i) {
            const auto& report = reports[i];
            const std::string scheme = scheme_name(combos[i].scheme);
            for (std::size_t trial = 0; trial < report.trial_scores.size(); ++trial)
                for (std::size_t n = 0; n < report.trial_scores[trial].size(); ++n)
                    csv << n << ',' << format_double(report.trial_scores[trial][n]) << ','
                        << combos[i].budget << ',' << scheme << ',' << trial << '\n';
            summary.push_back({{"budget", combos[i].budget},
                               {"scheme", scheme},
                               {"mean_correlation", report.correlation_to_reference},
                               {"mean_scores", report.scores}});
        }

        nlohmann::json doc{{"seed", config.seed},
                           {"field_seed", section.field_seed},
                           {"reference_budget", section.reference_budget},
                           {"trials", section.trials},
                           {"results", summary}};
        const std::filesystem::path out(config.out_dir);
        write_file(out / "influence.csv", csv.str());
        write_file(out / "correlations.json", doc.dump(2) + "\n");
    });
}

}  // namespace mcvr
