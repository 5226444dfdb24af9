#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcvr/sampling.hpp"

namespace mcvr {

// Synthetic per-example gradient field g_n(t, ε) = c_n + m(t)·d_n + s·ε with
// fixed per-example vectors and a shared profile m(t).
struct GradientField {
    std::size_t dim = 8;
    BaseDistribution base;
    std::function<double(double)> profile;  // m(t)
    double noise_scale = 0.0;               // s
    std::vector<double> query_const, query_dir;
    std::vector<std::vector<double>> example_const, example_dir;

    std::size_t examples() const { return example_const.size(); }
    std::vector<double> query_gradient(double t, std::span<const double> eps) const;
    std::vector<double> example_gradient(std::size_t n, double t, std::span<const double> eps) const;
};

// Default field: 12 examples in 8 dimensions with a mildly t-varying profile,
// so gradient norms stay approximately constant across timesteps.
GradientField default_gradient_field(std::uint64_t seed = 0);

struct Draw {
    double t = 0.0;
    std::vector<double> eps;
};

enum class AttributionScheme { kIid, kStratGlobal };

std::string scheme_name(AttributionScheme scheme);

// Shared (t, ε) draw set; stratification is global over t, ε stays IID.
std::vector<Draw> make_draws(const GradientField& field, std::size_t budget,
                             AttributionScheme scheme, RngStream& rng);

// Mean cosine similarity between the query's and example n's gradients over
// the shared draws.
double influence_score(const GradientField& field, std::size_t n, const std::vector<Draw>& draws);

std::vector<double> influence_scores(const GradientField& field, const std::vector<Draw>& draws);

enum class CorrelationKind { kPearson, kSpearman };

// Pearson by default; a Spearman variant sits behind the flag.
double ranking_correlation(std::span<const double> scores, std::span<const double> reference,
                           CorrelationKind kind = CorrelationKind::kPearson);

struct InfluenceReport {
    std::vector<double> scores;  // per-example, averaged over trials
    std::size_t budget = 0;
    AttributionScheme scheme = AttributionScheme::kIid;
    double correlation_to_reference = 0.0;   // mean over trials
    std::vector<double> trial_correlations;  // one per trial
    std::vector<std::vector<double>> trial_scores;
};

struct AttributionConfig {
    std::size_t reference_budget = 768;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    CorrelationKind correlation = CorrelationKind::kPearson;
};

// Scores every example on shared draws at the given budget and correlates the
// score vector against the full-budget reference (stratified draws at
// reference_budget, derived from the same seed).
InfluenceReport attribution_experiment(const GradientField& field, std::size_t budget,
                                       AttributionScheme scheme, const AttributionConfig& config);

// The reference score vector used by attribution_experiment.
std::vector<double> reference_scores(const GradientField& field, const AttributionConfig& config);

}  // namespace mcvr
