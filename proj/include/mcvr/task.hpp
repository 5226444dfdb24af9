#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcvr/efficiency.hpp"
#include "mcvr/rng.hpp"
#include "mcvr/sampling.hpp"

namespace mcvr {

// Expensive cached upstream state; an abstract per-draw latent.
using RenderState = std::vector<double>;

// Closed-form facts about a synthetic task, for oracle checks.
struct TaskAnalytic {
    std::vector<double> true_mean;
    double sigma_a2 = 0.0;  // across-render variance of a single draw
    double sigma_b2 = 0.0;  // within-render conditional variance
};

// Hierarchical integrand: expensive render states plus a cheap per-(t, ε)
// contribution vector. Everything is pure given the explicit random streams.
struct Task {
    std::string name;
    std::size_t dim = 1;
    std::size_t noise_dim = 1;
    BaseDistribution base;
    CostModel cost_model = CostModel::parametric(1.0);
    std::function<RenderState(RngStream&)> render_sampler;
    std::function<std::vector<double>(const RenderState&, double, std::span<const double>)> contribution;
    // Known scalar weight profile multiplying the contribution; used as the
    // negligible-cost proposal when sampling in proposal mode. May be null.
    std::function<double(double)> weight_profile;
    std::optional<TaskAnalytic> analytic;
};

}  // namespace mcvr
