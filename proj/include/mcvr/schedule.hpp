#pragma once

#include <vector>

namespace mcvr {

// Discrete diffusion-style noise schedule with scaled-linear spacing in
// sqrt(beta). Continuous t in [0,1] indexes the grid by linear interpolation
// of the cumulative signal fraction alpha_bar, so alpha_t^2 + sigma_t^2 = 1
// holds identically.
struct SyntheticSchedule {
    double beta_start = 0.00085;
    double beta_end = 0.012;
    int steps = 1000;
    std::vector<double> alpha_bar;

    static SyntheticSchedule scaled_linear(double beta_start = 0.00085,
                                           double beta_end = 0.012,
                                           int steps = 1000);

    double alpha_bar_at(double t) const;
    double alpha_t(double t) const;
    double sigma_t(double t) const;
};

enum class SdsWeightKind { kSigmaSq };

// Teacher-weight profile w(t)·alpha_t with the noise-prediction choice
// w(t) = sigma_t^2, giving the characteristic unimodal shape.
double weight_sds(double t, const SyntheticSchedule& schedule,
                  SdsWeightKind kind = SdsWeightKind::kSigmaSq);

// Shared default schedule instance (immutable).
const SyntheticSchedule& default_schedule();

}  // namespace mcvr
