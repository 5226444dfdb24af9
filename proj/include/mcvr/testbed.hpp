#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mcvr/task.hpp"

namespace mcvr {

// Two-bump test profile on [0,1]: a floor, a sharp bump at 0.7 and a broad
// one at 0.25.
double toy_profile(double t);

// dim-2 task g(t, ε) = f(t)·(cos πt, sin πt) + ρ·f(t)·ε on uniform [0,1].
// No render randomness; the analytic mean comes from quadrature.
Task toy_integrand(double noise_scale);

// g(x, t, ε) = A(x) + B(ε) with configured across-render variance sigma_a2
// and within-render variance sigma_b2; estimator variance is exactly
// sigma_a2/R + sigma_b2/(R·K).
Task hierarchical_task(double sigma_a2, double sigma_b2, std::size_t dim);

// g = (t, t², sin 2πt) on uniform [0,1]; quadrature truth (1/2, 1/3, 0).
// Its proposal profile is the strongly non-uniform synthetic teacher weight.
Task polynomial_task();

struct SdsLikeParams {
    std::size_t dim = 4;
    double direction_scale = 1.0;  // deterministic drift along a t-rotating direction
    double render_scale = 0.5;     // across-render component
    double noise_scale = 0.5;      // per-draw Gaussian component
    double t_min = 0.02;
    double t_max = 0.98;
};

// Teacher-weighted residual task on the synthetic schedule:
// g(x, t, ε) = w_sds(t)·(a·dir(t) + b·x + c·ε).
Task sds_like_task(const SdsLikeParams& params = {});

// Variance-minimizing proposal estimated by equal-width binning of ‖g‖²:
// sqrt of the per-bin mean, floor-mixed at 1e-3.
Proposal oracle_proposal(const Task& task, std::size_t bins, std::size_t samples_per_bin,
                         std::uint64_t seed = 0);

// Parses task references of the form "name{key=value,...}", e.g.
// "toy{rho=0.1}", "hier{sigmaA2=1,sigmaB2=4,dim=4}", "sdslike{}", "poly{}".
Task make_task(const std::string& reference);

}  // namespace mcvr
