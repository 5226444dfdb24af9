#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "mcvr/task.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mcvr {

enum class Allocation { kIid, kStratPerRender, kStratGlobal };

// Timestep distribution choice: sample the base directly, or an importance
// proposal identified by a named weight profile ("task", "one", "sds").
struct TimestepMode {
    bool use_proposal = false;
    std::string weight_id = "task";

    static TimestepMode base() { return {}; }
    static TimestepMode proposal(std::string weight_id = "task") { return {true, std::move(weight_id)}; }
};

// (R renders, K re-noisings, timestep mode, allocation, seed) fully
// determines one estimator.
struct EstimatorSpec {
    int renders = 1;
    int renoisings = 1;
    TimestepMode mode;
    Allocation allocation = Allocation::kIid;
    std::uint64_t seed = 0;

    void validate() const;
    // Per-render stratification with K = 1 equals IID sampling.
    bool degenerate_stratification() const {
        return allocation == Allocation::kStratPerRender && renoisings == 1;
    }
};

struct GradientEstimate {
    std::vector<double> value;
    int renders_used = 0;
    long evals_used = 0;
    double cost = 0.0;
};

// Spec with the proposal resolved once, so repeated trials share the
// tabulated CDF.
class PreparedEstimator {
  public:
    PreparedEstimator(const Task& task, EstimatorSpec spec);
    // Uses the supplied proposal (e.g. a binned oracle) instead of resolving
    // the spec's weight id.
    PreparedEstimator(const Task& task, EstimatorSpec spec,
                      std::shared_ptr<const Proposal> proposal);

    GradientEstimate run(std::uint64_t trial = 0) const;
    const EstimatorSpec& spec() const { return spec_; }
    const Task& task() const { return *task_; }
    const Proposal* proposal() const { return proposal_.get(); }

  private:
    const Task* task_;
    EstimatorSpec spec_;
    std::shared_ptr<const Proposal> proposal_;
};

// One estimate under the spec's sampling construction; trial indexes the
// independent random stream.
GradientEstimate run_estimator(const Task& task, const EstimatorSpec& spec, std::uint64_t trial = 0);

// The combined IW + stratified + re-noising loop, written out stratum by
// stratum as the reference composition. Bit-identical to run_estimator with
// the same (proposal, per-render stratified) spec.
GradientEstimate combined_pipeline(const Task& task, const EstimatorSpec& spec, std::uint64_t trial = 0);

// Resolve the named weight profile into a tabulated proposal. Returns null
// for base mode.
std::shared_ptr<const Proposal> resolve_proposal(const Task& task, const TimestepMode& mode);

nlohmann::json spec_to_json(const EstimatorSpec& spec);
EstimatorSpec spec_from_json(const nlohmann::json& doc);

std::string allocation_name(Allocation allocation);
Allocation allocation_from_name(const std::string& name);

}  // namespace mcvr
