#include "mcvr/variance.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "mcvr/parallel.hpp"

namespace mcvr {

void welford_update(WelfordState& acc, std::span<const double> x) {
    if (acc.count == 0) {
        acc.mean.assign(x.begin(), x.end());
        acc.m2 = 0.0;
        acc.count = 1;
        return;
    }
    if (x.size() != acc.mean.size()) throw std::invalid_argument("welford update dimension mismatch");
    acc.count += 1;
    const double inv_n = 1.0 / static_cast<double>(acc.count);
    double cross = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double delta = x[d] - acc.mean[d];
        acc.mean[d] += delta * inv_n;
        cross += delta * (x[d] - acc.mean[d]);
    }
    acc.m2 += cross;
}

WelfordState welford_merge(const WelfordState& a, const WelfordState& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    if (a.mean.size() != b.mean.size()) throw std::invalid_argument("welford merge dimension mismatch");

    WelfordState out;
    out.count = a.count + b.count;
    out.mean.resize(a.mean.size());
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = na + nb;
    double delta_sq = 0.0;
    for (std::size_t d = 0; d < out.mean.size(); ++d) {
        const double delta = b.mean[d] - a.mean[d];
        out.mean[d] = a.mean[d] + delta * (nb / n);
        delta_sq += delta * delta;
    }
    out.m2 = a.m2 + b.m2 + delta_sq * (na * nb / n);
    return out;
}

VarianceSummary welford_finalize(const WelfordState& acc) {
    VarianceSummary out;
    out.samples = acc.count;
    out.mean = acc.count == 0 ? std::vector<double>{} : acc.mean;
    if (acc.count < 2) {
        out.trace_cov = 0.0;
        out.insufficient_samples = true;
        return out;
    }
    out.trace_cov = acc.m2 / static_cast<double>(acc.count - 1);
    return out;
}

void ConvergenceCriterion::validate() const {
    if (warmup == 0 || interval == 0 || consecutive == 0 || cap == 0 || rel_tol <= 0.0)
        throw std::invalid_argument("convergence criterion fields must be positive");
}

namespace {

double relative_change(double previous, double current) {
    if (previous == current) return 0.0;
    if (previous == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(current - previous) / std::abs(previous);
}

// Accumulates trials [next, next+count) in trial order; estimates within the
// round are evaluated in parallel, the fold is sequential and thread-count
// independent.
void accumulate_round(const PreparedEstimator& estimator, WelfordState& acc, std::size_t next,
                      std::size_t count, unsigned threads) {
    std::vector<std::vector<double>> round(count);
    parallel_for_index(count, threads, [&](std::size_t i) {
        round[i] = estimator.run(next + i).value;
    });
    for (auto& estimate : round) welford_update(acc, estimate);
}

}  // namespace

VarianceReport run_until_converged(const Task& task, const EstimatorSpec& spec,
                                   const ConvergenceCriterion& criterion, unsigned threads) {
    return run_until_converged(PreparedEstimator(task, spec), criterion, threads);
}

VarianceReport run_until_converged(const PreparedEstimator& estimator,
                                   const ConvergenceCriterion& criterion, unsigned threads) {
    criterion.validate();
    const EstimatorSpec& spec = estimator.spec();
    const double per_estimate_cost =
        estimator.task().cost_model.cost(spec.renders, spec.renoisings);

    WelfordState acc;
    std::size_t drawn = 0;
    std::optional<std::size_t> converged_at;

    const std::size_t first_stop = std::min(criterion.warmup, criterion.cap);
    accumulate_round(estimator, acc, 0, first_stop, threads);
    drawn = first_stop;

    if (drawn >= criterion.warmup) {
        double previous = welford_finalize(acc).trace_cov;
        std::size_t streak = 0;
        while (drawn < criterion.cap && !converged_at) {
            const std::size_t step = std::min(criterion.interval, criterion.cap - drawn);
            accumulate_round(estimator, acc, drawn, step, threads);
            drawn += step;
            if (step < criterion.interval) break;  // cap truncated the check window
            const double current = welford_finalize(acc).trace_cov;
            streak = relative_change(previous, current) < criterion.rel_tol ? streak + 1 : 0;
            previous = current;
            if (streak >= criterion.consecutive) converged_at = drawn;
        }
    }

    const VarianceSummary summary = welford_finalize(acc);
    VarianceReport report;
    report.mean = summary.mean;
    report.trace_cov = summary.trace_cov;
    report.samples = drawn;
    report.converged_at = converged_at;
    report.wall_cost = static_cast<double>(drawn) * per_estimate_cost;
    report.insufficient_samples = summary.insufficient_samples;
    return report;
}

VarianceSummary measure_variance(const PreparedEstimator& estimator, std::size_t trials,
                                 unsigned threads, std::uint64_t trial_offset) {
    if (trials == 0) throw std::invalid_argument("variance measurement needs at least one trial");
    WelfordState acc;
    std::size_t done = 0;
    while (done < trials) {
        const std::size_t step = std::min<std::size_t>(trials - done, 4096);
        std::vector<std::vector<double>> round(step);
        parallel_for_index(step, threads, [&](std::size_t i) {
            round[i] = estimator.run(trial_offset + done + i).value;
        });
        for (auto& estimate : round) welford_update(acc, estimate);
        done += step;
    }
    return welford_finalize(acc);
}

std::vector<double> reference_mean(const Task& task, const EstimatorSpec& spec, std::size_t n_gt,
                                   unsigned threads, std::size_t test_samples) {
    if (n_gt == 0) throw std::invalid_argument("reference mean needs at least one sample");
    if (test_samples > 0 && n_gt < 100 * test_samples)
        std::cerr << "warning: reference sample count " << n_gt
                  << " is below 100x the test sample count " << test_samples
                  << "; reference bias may not be negligible\n";

    const PreparedEstimator estimator(task, spec);
    // Blocked mean keeps the fold order fixed for any thread count.
    const std::size_t blocks = std::min<std::size_t>(n_gt, 64);
    const std::size_t chunk = (n_gt + blocks - 1) / blocks;
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(task.dim, 0.0));
    parallel_for_index(blocks, threads, [&](std::size_t b) {
        const std::size_t begin = b * chunk;
        const std::size_t end = std::min(n_gt, begin + chunk);
        for (std::size_t i = begin; i < end; ++i) {
            const auto estimate = estimator.run(i).value;
            for (std::size_t d = 0; d < estimate.size(); ++d) partial[b][d] += estimate[d];
        }
    });
    std::vector<double> mean(task.dim, 0.0);
    for (const auto& block : partial)
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += block[d];
    for (auto& v : mean) v /= static_cast<double>(n_gt);
    return mean;
}

double mse_to_reference(const std::vector<std::vector<double>>& estimates,
                        std::span<const double> reference) {
    if (estimates.empty()) throw std::invalid_argument("mse needs at least one estimate");
    double total = 0.0;
    for (const auto& estimate : estimates) {
        if (estimate.size() != reference.size())
            throw std::invalid_argument("mse dimension mismatch");
        double sq = 0.0;
        for (std::size_t d = 0; d < reference.size(); ++d) {
            const double diff = estimate[d] - reference[d];
            sq += diff * diff;
        }
        total += sq;
    }
    return total / static_cast<double>(estimates.size());
}

double cosine_to_reference(std::span<const double> estimate, std::span<const double> reference) {
    if (estimate.size() != reference.size()) throw std::invalid_argument("cosine dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t d = 0; d < estimate.size(); ++d) {
        dot += estimate[d] * reference[d];
        na += estimate[d] * estimate[d];
        nb += reference[d] * reference[d];
    }
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine of zero-norm vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

nlohmann::json report_to_json(const VarianceReport& report) {
    nlohmann::json doc{{"mean", report.mean},
                       {"trace_cov", report.trace_cov},
                       {"samples", report.samples},
                       {"wall_cost", report.wall_cost},
                       {"insufficient_samples", report.insufficient_samples}};
    if (report.converged_at)
        doc["converged_at"] = *report.converged_at;
    else
        doc["converged_at"] = nullptr;
    return doc;
}

}  // namespace mcvr
