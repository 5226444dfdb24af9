#include "mcvr/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace mcvr {

SyntheticSchedule SyntheticSchedule::scaled_linear(double beta_start, double beta_end, int steps) {
    if (steps < 2) throw std::invalid_argument("schedule needs at least 2 steps");
    if (!(beta_start > 0.0 && beta_end > beta_start && beta_end < 1.0))
        throw std::invalid_argument("schedule requires 0 < beta_start < beta_end < 1");
    SyntheticSchedule sched;
    sched.beta_start = beta_start;
    sched.beta_end = beta_end;
    sched.steps = steps;
    sched.alpha_bar.resize(steps);
    const double root_start = std::sqrt(beta_start);
    const double root_end = std::sqrt(beta_end);
    double cumulative = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
        const double root = root_start + frac * (root_end - root_start);
        cumulative *= 1.0 - root * root;
        sched.alpha_bar[i] = cumulative;
    }
    return sched;
}

double SyntheticSchedule::alpha_bar_at(double t) const {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("schedule time must lie in [0, 1]");
    const double x = t * static_cast<double>(steps - 1);
    auto i = static_cast<std::size_t>(x);
    if (i >= alpha_bar.size() - 1) return alpha_bar.back();
    const double frac = x - static_cast<double>(i);
    return alpha_bar[i] + frac * (alpha_bar[i + 1] - alpha_bar[i]);
}

double SyntheticSchedule::alpha_t(double t) const { return std::sqrt(alpha_bar_at(t)); }

double SyntheticSchedule::sigma_t(double t) const { return std::sqrt(1.0 - alpha_bar_at(t)); }

double weight_sds(double t, const SyntheticSchedule& schedule, SdsWeightKind kind) {
    switch (kind) {
        case SdsWeightKind::kSigmaSq: {
            const double ab = schedule.alpha_bar_at(t);
            return (1.0 - ab) * std::sqrt(ab);
        }
    }
    throw std::invalid_argument("unknown SDS weight kind");
}

const SyntheticSchedule& default_schedule() {
    static const SyntheticSchedule sched = SyntheticSchedule::scaled_linear();
    return sched;
}

}  // namespace mcvr
