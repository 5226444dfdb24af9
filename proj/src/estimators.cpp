#include "mcvr/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcvr/schedule.hpp"

namespace mcvr {

void EstimatorSpec::validate() const {
    if (renders < 1) throw std::invalid_argument("render count must be positive");
    if (renoisings < 1) throw std::invalid_argument("re-noising count must be positive");
}

std::shared_ptr<const Proposal> resolve_proposal(const Task& task, const TimestepMode& mode) {
    if (!mode.use_proposal) return nullptr;
    std::function<double(double)> profile;
    if (mode.weight_id == "task") {
        if (!task.weight_profile)
            throw std::invalid_argument("task '" + task.name + "' has no weight profile for proposal mode");
        profile = task.weight_profile;
    } else if (mode.weight_id == "one") {
        profile = [](double) { return 1.0; };
    } else if (mode.weight_id == "sds") {
        profile = [](double t) { return weight_sds(t, default_schedule()); };
    } else {
        throw std::invalid_argument("unknown weight id '" + mode.weight_id + "'");
    }
    // Analytic profiles need no support floor; q > 0 follows from the profile.
    return std::make_shared<const Proposal>(build_proposal(task.base, profile, kCdfGridSize, 0.0));
}

PreparedEstimator::PreparedEstimator(const Task& task, EstimatorSpec spec)
    : PreparedEstimator(task, spec, resolve_proposal(task, spec.mode)) {}

PreparedEstimator::PreparedEstimator(const Task& task, EstimatorSpec spec,
                                     std::shared_ptr<const Proposal> proposal)
    : task_(&task), spec_(spec), proposal_(std::move(proposal)) {
    spec_.validate();
    if (!task.contribution || !task.render_sampler)
        throw std::invalid_argument("task must define render_sampler and contribution");
    if (spec_.mode.use_proposal && !proposal_)
        throw std::invalid_argument("proposal mode needs a proposal");
}

GradientEstimate PreparedEstimator::run(std::uint64_t trial) const {
    const int renders = spec_.renders;
    const int renoisings = spec_.renoisings;
    const auto total = static_cast<double>(renders) * renoisings;

    const RngStream trial_stream = RngStream(spec_.seed).child(kTagTrial, trial);
    std::vector<double> value(task_->dim, 0.0);
    std::vector<double> eps(task_->noise_dim);

    for (int r = 0; r < renders; ++r) {
        RngStream render_rng = trial_stream.child(kTagRender, static_cast<std::uint64_t>(r));
        const RenderState state = task_->render_sampler(render_rng);
        RngStream t_rng = trial_stream.child(kTagTimestep, static_cast<std::uint64_t>(r));

        for (int k = 0; k < renoisings; ++k) {
            const double jitter = t_rng.uniform();
            double u = jitter;
            if (spec_.allocation == Allocation::kStratPerRender)
                u = (k + jitter) / renoisings;
            else if (spec_.allocation == Allocation::kStratGlobal)
                u = (static_cast<double>(r) * renoisings + k + jitter) / total;

            double t = 0.0;
            double ratio = 1.0;
            if (proposal_) {
                t = inverse_cdf(*proposal_, u);
                ratio = importance_weight(*proposal_, t);
            } else {
                t = task_->base.sample(u);
            }

            RngStream eps_rng =
                trial_stream.child(kTagNoise, static_cast<std::uint64_t>(r) * renoisings + k);
            eps_rng.fill_normal(eps);

            const std::vector<double> g = task_->contribution(state, t, eps);
            if (g.size() != task_->dim) throw std::runtime_error("contribution dimension mismatch");
            for (std::size_t d = 0; d < value.size(); ++d) value[d] += ratio * g[d];
        }
    }
    for (auto& v : value) v /= total;

    GradientEstimate out;
    out.value = std::move(value);
    out.renders_used = renders;
    out.evals_used = static_cast<long>(renders) * renoisings;
    out.cost = task_->cost_model.cost(renders, renoisings);
    return out;
}

GradientEstimate run_estimator(const Task& task, const EstimatorSpec& spec, std::uint64_t trial) {
    return PreparedEstimator(task, spec).run(trial);
}

GradientEstimate combined_pipeline(const Task& task, const EstimatorSpec& spec, std::uint64_t trial) {
    if (!spec.mode.use_proposal || spec.allocation != Allocation::kStratPerRender)
        throw std::invalid_argument("combined pipeline requires proposal mode with per-render stratification");
    spec.validate();
    const auto proposal = resolve_proposal(task, spec.mode);

    const int renders = spec.renders;
    const int strata = spec.renoisings;
    const RngStream trial_stream = RngStream(spec.seed).child(kTagTrial, trial);

    std::vector<double> value(task.dim, 0.0);
    std::vector<double> eps(task.noise_dim);
    for (int r = 0; r < renders; ++r) {
        RngStream render_rng = trial_stream.child(kTagRender, static_cast<std::uint64_t>(r));
        const RenderState state = task.render_sampler(render_rng);
        RngStream t_rng = trial_stream.child(kTagTimestep, static_cast<std::uint64_t>(r));

        std::vector<double> per_render(task.dim, 0.0);
        for (int k = 0; k < strata; ++k) {
            // Stratified quantile, inverse-CDF timestep, fresh noise,
            // likelihood-ratio-weighted contribution.
            const double u = (k + t_rng.uniform()) / strata;
            const double t = inverse_cdf(*proposal, u);
            const double ratio = importance_weight(*proposal, t);
            RngStream eps_rng = trial_stream.child(kTagNoise, static_cast<std::uint64_t>(r) * strata + k);
            eps_rng.fill_normal(eps);
            const std::vector<double> g = task.contribution(state, t, eps);
            for (std::size_t d = 0; d < per_render.size(); ++d) per_render[d] += ratio * g[d];
        }
        for (std::size_t d = 0; d < value.size(); ++d) value[d] += per_render[d] / strata;
    }
    for (auto& v : value) v /= renders;

    GradientEstimate out;
    out.value = std::move(value);
    out.renders_used = renders;
    out.evals_used = static_cast<long>(renders) * strata;
    out.cost = task.cost_model.cost(renders, strata);
    return out;
}

std::string allocation_name(Allocation allocation) {
    switch (allocation) {
        case Allocation::kIid: return "iid";
        case Allocation::kStratPerRender: return "strat_per_render";
        case Allocation::kStratGlobal: return "strat_global";
    }
    throw std::invalid_argument("unknown allocation");
}

Allocation allocation_from_name(const std::string& name) {
    if (name == "iid") return Allocation::kIid;
    if (name == "strat_per_render") return Allocation::kStratPerRender;
    if (name == "strat_global") return Allocation::kStratGlobal;
    throw std::invalid_argument("unknown allocation '" + name + "'");
}

nlohmann::json spec_to_json(const EstimatorSpec& spec) {
    const std::string mode =
        spec.mode.use_proposal ? "proposal:" + spec.mode.weight_id : std::string("base");
    return nlohmann::json{{"R", spec.renders},
                          {"K", spec.renoisings},
                          {"timestep_mode", mode},
                          {"allocation", allocation_name(spec.allocation)},
                          {"seed", spec.seed}};
}

EstimatorSpec spec_from_json(const nlohmann::json& doc) {
    EstimatorSpec spec;
    spec.renders = doc.at("R").get<int>();
    spec.renoisings = doc.at("K").get<int>();
    const auto mode = doc.at("timestep_mode").get<std::string>();
    if (mode == "base") {
        spec.mode = TimestepMode::base();
    } else if (mode.rfind("proposal:", 0) == 0) {
        spec.mode = TimestepMode::proposal(mode.substr(9));
    } else {
        throw std::invalid_argument("unknown timestep mode '" + mode + "'");
    }
    spec.allocation = allocation_from_name(doc.at("allocation").get<std::string>());
    spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

}  // namespace mcvr
