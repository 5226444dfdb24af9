#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mcvr/sampling.hpp"

using namespace mcvr;

namespace {

Proposal linear_density_proposal(std::size_t grid_size = kCdfGridSize) {
    // q(t) = 2t on [0,1], from the identity base and w(t) = t.
    return build_proposal({0.0, 1.0}, [](double t) { return t; }, grid_size, 0.0);
}

}  // namespace

TEST_CASE("identity weight reproduces the base distribution") {
    const Proposal q = build_proposal({0.0, 1.0}, [](double) { return 1.0; }, 64, 0.0);
    q.validate();
    CHECK(q.pdf(0.25) == doctest::Approx(1.0));
    CHECK(inverse_cdf(q, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(importance_weight(q, 0.77) == doctest::Approx(1.0));
}

TEST_CASE("linear weight yields q(t) = 2t") {
    const Proposal q = linear_density_proposal();
    q.validate();
    CHECK(q.pdf(0.5) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(q.pdf(1.0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(inverse_cdf(q, 0.25) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(importance_weight(q, 0.5) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(importance_weight(q, 0.25) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("tabulated inverse CDF tracks the analytic inverse sqrt(u)") {
    const Proposal q = linear_density_proposal(4096);
    double worst = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double u = static_cast<double>(i) / 10000.0;
        worst = std::max(worst, std::abs(inverse_cdf(q, u) - std::sqrt(u)));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("clamped support integrates to one") {
    const Proposal q = build_proposal(
        {0.02, 0.98}, [](double t) { return 0.05 + std::exp(-8.0 * (t - 0.6) * (t - 0.6)); },
        kCdfGridSize, 0.0);
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < q.grid.size(); ++i)
        integral += 0.5 * (q.density[i] + q.density[i + 1]) * (q.grid[i + 1] - q.grid[i]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("degenerate and invalid proposals are rejected") {
    CHECK_THROWS_WITH_AS(build_proposal({0.0, 1.0}, [](double) { return 0.0; }, 64, 0.0),
                         doctest::Contains("degenerate proposal"), std::runtime_error);
    CHECK_THROWS_AS(build_proposal({0.0, 1.0}, [](double) { return -1.0; }, 64, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_proposal({0.0, 1.0}, [](double) { return 1.0; }, 1, 0.0),
                    std::invalid_argument);
    // Floor mixing rescues an all-zero profile.
    const Proposal floored = build_proposal({0.0, 1.0}, [](double) { return 0.0; }, 64, 1e-3);
    CHECK(floored.pdf(0.5) == doctest::Approx(1.0));
}

TEST_CASE("quantiles outside the unit interval are rejected") {
    const Proposal q = linear_density_proposal(64);
    CHECK_THROWS_AS(inverse_cdf(q, -0.01), std::invalid_argument);
    CHECK_THROWS_AS(inverse_cdf(q, 1.01), std::invalid_argument);
}

TEST_CASE("stratified quantiles hit every stratum") {
    RngStream rng(7);
    SUBCASE("formula at fixed jitter") {
        // M = 4 with xi = 0.5 everywhere -> (0.125, 0.375, 0.625, 0.875).
        for (std::size_t k = 0; k < 4; ++k) {
            const double u = (static_cast<double>(k) + 0.5) / 4.0;
            CHECK(u == doctest::Approx(0.125 + 0.25 * static_cast<double>(k)));
        }
    }
    SUBCASE("single stratum is plain uniform") {
        const QuantileBatch batch = stratified_quantiles(1, rng);
        CHECK(batch.u.size() == 1);
        CHECK(batch.u[0] >= 0.0);
        CHECK(batch.u[0] < 1.0);
    }
    SUBCASE("coverage for many batches") {
        for (int rep = 0; rep < 200; ++rep) {
            const QuantileBatch batch = stratified_quantiles(8, rng);
            for (std::size_t k = 0; k < batch.u.size(); ++k) {
                CHECK(batch.u[k] >= static_cast<double>(k) / 8.0);
                CHECK(batch.u[k] < static_cast<double>(k + 1) / 8.0);
            }
        }
    }
}

TEST_CASE("snap_to_grid rounds to nearest index with ties down") {
    CHECK(snap_to_grid(0.5, 1000) == 499);  // 0.5 * 999 = 499.5 ties down
    CHECK(snap_to_grid(0.0, 1000) == 0);
    CHECK(snap_to_grid(1.0, 1000) == 999);
    for (int i = 0; i < 1000; i += 37)
        CHECK(snap_to_grid(static_cast<double>(i) / 999.0, 1000) == i);
    CHECK(snap_to_grid(0.4, 1) == 0);
}

TEST_CASE("inverse CDF is monotone in u") {
    const Proposal q = build_proposal(
        {0.0, 1.0}, [](double t) { return 0.01 + std::exp(-40.0 * (t - 0.7) * (t - 0.7)); },
        kCdfGridSize, 0.0);
    RngStream rng(11);
    for (int i = 0; i < 10000; ++i) {
        double u1 = rng.uniform();
        double u2 = rng.uniform();
        if (u1 > u2) std::swap(u1, u2);
        CHECK(inverse_cdf(q, u1) <= inverse_cdf(q, u2));
    }
}

TEST_CASE("empirical CDF of inverse-CDF draws matches the tabulation") {
    const Proposal q = build_proposal(
        {0.0, 1.0}, [](double t) { return 0.05 + std::exp(-30.0 * (t - 0.3) * (t - 0.3)); },
        kCdfGridSize, 0.0);
    constexpr std::size_t kDraws = 1000000;
    std::vector<double> draws(kDraws);
    RngStream rng(13);
    for (auto& t : draws) t = inverse_cdf(q, rng.uniform());
    std::sort(draws.begin(), draws.end());

    auto cdf_at = [&q](double t) {
        const double h = q.step();
        const auto i = std::min(static_cast<std::size_t>((t - q.base.t_min) / h), q.grid.size() - 2);
        const double frac = (t - q.grid[i]) / h;
        // CDF between nodes is linear, matching the inverse used for sampling.
        return q.cdf[i] + frac * (q.cdf[i + 1] - q.cdf[i]);
    };
    double ks = 0.0;
    for (std::size_t i = 0; i < kDraws; ++i) {
        const double fn_hi = static_cast<double>(i + 1) / kDraws;
        const double fn_lo = static_cast<double>(i) / kDraws;
        const double f = cdf_at(draws[i]);
        ks = std::max({ks, std::abs(fn_hi - f), std::abs(fn_lo - f)});
    }
    // KS critical value at the 1e-3 significance level.
    CHECK(ks < 1.9495 / std::sqrt(static_cast<double>(kDraws)));
}

TEST_CASE("importance weights reproduce base expectations") {
    const Proposal q = linear_density_proposal();
    RngStream rng(17);
    constexpr std::size_t kDraws = 100000;
    // h(t) in {1, t, t^2} with exact uniform means 1, 1/2, 1/3.
    const double truth[3] = {1.0, 0.5, 1.0 / 3.0};
    double sum[3] = {0, 0, 0}, sum_sq[3] = {0, 0, 0};
    for (std::size_t i = 0; i < kDraws; ++i) {
        const double t = inverse_cdf(q, rng.uniform());
        const double w = importance_weight(q, t);
        const double h[3] = {w, w * t, w * t * t};
        for (int k = 0; k < 3; ++k) {
            sum[k] += h[k];
            sum_sq[k] += h[k] * h[k];
        }
    }
    for (int k = 0; k < 3; ++k) {
        const double mean = sum[k] / kDraws;
        const double var = (sum_sq[k] / kDraws - mean * mean) / kDraws;
        CHECK(std::abs(mean - truth[k]) <= 5.0 * std::sqrt(var));
    }
}

TEST_CASE("proposal JSON round trip") {
    const Proposal q = build_proposal({0.02, 0.98}, [](double t) { return 1.0 + t; }, 256, 1e-3);
    const Proposal back = proposal_from_json(proposal_to_json(q));
    CHECK(back.base.t_min == q.base.t_min);
    CHECK(back.base.t_max == q.base.t_max);
    CHECK(back.floor_mix == q.floor_mix);
    for (int i = 0; i <= 20; ++i) {
        const double u = static_cast<double>(i) / 20.0;
        CHECK(inverse_cdf(back, u) == doctest::Approx(inverse_cdf(q, u)).epsilon(1e-12));
    }
}
