#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mcvr/estimators.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mcvr {

// Mergeable one-pass accumulator of a vector mean and the trace of the
// covariance (m2 aggregates squared deviations across all dimensions).
struct WelfordState {
    std::size_t count = 0;
    std::vector<double> mean;
    double m2 = 0.0;
};

void welford_update(WelfordState& acc, std::span<const double> x);

// Equivalent to accumulating a's samples then b's, up to floating tolerance.
WelfordState welford_merge(const WelfordState& a, const WelfordState& b);

// Unbiased (count-1) trace covariance; zero with the insufficient-samples
// flag when fewer than two samples were seen.
struct VarianceSummary {
    std::vector<double> mean;
    double trace_cov = 0.0;
    std::size_t samples = 0;
    bool insufficient_samples = false;
};

VarianceSummary welford_finalize(const WelfordState& acc);

struct ConvergenceCriterion {
    std::size_t warmup = 1000;
    std::size_t interval = 50;
    double rel_tol = 1e-3;
    std::size_t consecutive = 3;
    std::size_t cap = 20000;

    void validate() const;
};

struct VarianceReport {
    std::vector<double> mean;
    double trace_cov = 0.0;
    std::size_t samples = 0;
    std::optional<std::size_t> converged_at;
    double wall_cost = 0.0;
    bool insufficient_samples = false;
};

// Accumulates fresh estimates until the trace-covariance estimate is stable:
// after `warmup` samples, check every `interval`; stop once the relative
// change stays below rel_tol for `consecutive` checks, or at `cap`.
VarianceReport run_until_converged(const Task& task, const EstimatorSpec& spec,
                                   const ConvergenceCriterion& criterion = {},
                                   unsigned threads = 1);
VarianceReport run_until_converged(const PreparedEstimator& estimator,
                                   const ConvergenceCriterion& criterion = {},
                                   unsigned threads = 1);

// Welford accumulation over exactly `trials` independent estimates.
VarianceSummary measure_variance(const PreparedEstimator& estimator, std::size_t trials,
                                 unsigned threads = 1, std::uint64_t trial_offset = 0);

// Average of n_gt independent estimates. When the intended test sample count
// is known, warns if n_gt is below 100x that count.
std::vector<double> reference_mean(const Task& task, const EstimatorSpec& spec, std::size_t n_gt,
                                   unsigned threads = 1, std::size_t test_samples = 0);

double mse_to_reference(const std::vector<std::vector<double>>& estimates,
                        std::span<const double> reference);
double cosine_to_reference(std::span<const double> estimate, std::span<const double> reference);

nlohmann::json report_to_json(const VarianceReport& report);

}  // namespace mcvr
