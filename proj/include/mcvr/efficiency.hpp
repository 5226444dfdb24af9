#pragma once

#include <map>
#include <utility>
#include <vector>

namespace mcvr {

// Per-estimate compute cost. Parametric models follow cost = alpha*R + R*K
// with the denoise unit cost fixed at 1; measured models look up (R, K).
class CostModel {
  public:
    static CostModel parametric(double alpha);
    static CostModel measured(std::map<std::pair<int, int>, double> table);

    bool is_parametric() const { return parametric_; }
    double alpha() const { return alpha_; }
    double cost(int renders, int renoisings) const;

  private:
    bool parametric_ = true;
    double alpha_ = 1.0;
    std::map<std::pair<int, int>, double> table_;
};

struct ParetoPoint {
    double cost = 0.0;
    double variance = 0.0;
};

// Dominance-filtered, cost-sorted (cost, variance) frontier. Lookups outside
// the measured range extrapolate with slope -1 in log-log space (Var ∝ 1/cost).
struct ParetoCurve {
    std::vector<ParetoPoint> points;
};

ParetoCurve pareto_baseline(std::vector<ParetoPoint> points);

// Baseline cost interpolated at the given variance, piecewise linear in
// log-log space between adjacent curve points.
double baseline_cost_at(const ParetoCurve& curve, double variance, bool extrapolate = true);

// Effective compute multiplier: interpolated baseline cost at the method's
// variance divided by the method's cost.
double ecm(const ParetoPoint& method, const ParetoCurve& baseline, bool extrapolate = true);

// Var_uniform / Var_method at identical (R, K).
double relative_efficiency(double var_uniform, double var_method);

}  // namespace mcvr
