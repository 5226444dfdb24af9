#include "doctest.h"

#include <cmath>

#include "mcvr/schedule.hpp"

using namespace mcvr;

TEST_CASE("schedule identity alpha^2 + sigma^2 = 1") {
    const auto& sched = default_schedule();
    for (int i = 0; i <= 1000; ++i) {
        const double t = static_cast<double>(i) / 1000.0;
        const double a = sched.alpha_t(t);
        const double s = sched.sigma_t(t);
        CHECK(std::abs(a * a + s * s - 1.0) <= 1e-12);
    }
}

TEST_CASE("alpha is monotone nonincreasing in t") {
    const auto& sched = default_schedule();
    double prev = sched.alpha_t(0.0);
    for (int i = 1; i <= 2000; ++i) {
        const double cur = sched.alpha_t(static_cast<double>(i) / 2000.0);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("teacher weight vanishes at the endpoints and peaks inside") {
    const auto& sched = default_schedule();
    const double w0 = weight_sds(0.0, sched);
    const double w1 = weight_sds(1.0, sched);
    CHECK(w0 <= 1e-3);  // sigma_0^2 = beta_start

    int argmax = 0;
    double best = 0.0;
    std::vector<double> values;
    for (int i = 0; i <= 1000; ++i) {
        const double w = weight_sds(static_cast<double>(i) / 1000.0, sched);
        values.push_back(w);
        if (w > best) {
            best = w;
            argmax = i;
        }
    }
    CHECK(argmax > 0);
    CHECK(argmax < 1000);
    CHECK(best > w0);
    CHECK(best > w1);

    // Unimodal over the grid: one rising run, then one falling run.
    int sign_changes = 0;
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        const bool rising_before = values[i] > values[i - 1];
        const bool falling_after = values[i + 1] < values[i];
        if (rising_before && falling_after) ++sign_changes;
    }
    CHECK(sign_changes == 1);
}
