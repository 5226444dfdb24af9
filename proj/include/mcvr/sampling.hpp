#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "mcvr/rng.hpp"

#include <nlohmann/json_fwd.hpp>

namespace mcvr {

// Number of tabulation nodes for proposal CDFs. Piecewise-linear interpolation
// at this resolution keeps inverse-CDF error below 1e-4 on the unit interval.
inline constexpr std::size_t kCdfGridSize = 4096;

// Uniform base density p(t) on a clamped interval [t_min, t_max].
struct BaseDistribution {
    double t_min = 0.0;
    double t_max = 1.0;

    double span() const { return t_max - t_min; }
    double pdf(double t) const { return (t >= t_min && t <= t_max) ? 1.0 / span() : 0.0; }
    // Inverse CDF of the uniform base.
    double sample(double u) const { return t_min + u * span(); }

    void validate() const;
};

// Timestep proposal q(t) ∝ (1-η)·p(t)·w(t) + η·p(t), tabulated on an equally
// spaced grid over the support with a piecewise-linear density and CDF.
struct Proposal {
    BaseDistribution base;
    std::vector<double> grid;     // node positions, grid.front()=t_min, grid.back()=t_max
    std::vector<double> density;  // q at nodes, trapezoid-normalized to integrate to 1
    std::vector<double> cdf;      // cdf.front()=0, cdf.back()=1, nondecreasing
    double floor_mix = 0.0;

    double step() const { return grid[1] - grid[0]; }
    // Interpolated density at t; zero outside the support.
    double pdf(double t) const;

    void validate() const;
};

// One stratified-quantile batch: exactly one u in each of the M equal strata.
struct QuantileBatch {
    std::size_t strata = 0;
    std::vector<double> u;
};

Proposal build_proposal(const BaseDistribution& base,
                        const std::function<double(double)>& weight_profile,
                        std::size_t grid_size = kCdfGridSize,
                        double floor_mix = 0.0);

// Maps a quantile u in [0,1] through the tabulated CDF; monotone in u.
double inverse_cdf(const Proposal& proposal, double u);

// Likelihood ratio p(t)/q(t) under the same tabulation used for sampling.
double importance_weight(const Proposal& proposal, double t);

// u_k = (k-1+ξ_k)/M with independent ξ_k ~ U[0,1).
QuantileBatch stratified_quantiles(std::size_t strata, RngStream& rng);

// Nearest index in {0,...,grid_size-1} to t*(grid_size-1); ties round down.
int snap_to_grid(double t, int grid_size);

nlohmann::json proposal_to_json(const Proposal& proposal);
Proposal proposal_from_json(const nlohmann::json& doc);

}  // namespace mcvr
