#include "mcvr/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcvr {

CostModel CostModel::parametric(double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("cost alpha must be nonnegative");
    CostModel model;
    model.parametric_ = true;
    model.alpha_ = alpha;
    return model;
}

CostModel CostModel::measured(std::map<std::pair<int, int>, double> table) {
    CostModel model;
    model.parametric_ = false;
    model.table_ = std::move(table);
    return model;
}

double CostModel::cost(int renders, int renoisings) const {
    if (renders < 1 || renoisings < 1) throw std::invalid_argument("cost requires positive (R, K)");
    if (parametric_) {
        const double c = alpha_ * renders + static_cast<double>(renders) * renoisings;
        if (c <= 0.0) throw std::invalid_argument("parametric cost must be positive");
        return c;
    }
    const auto it = table_.find({renders, renoisings});
    if (it == table_.end()) throw std::out_of_range("measured cost table has no entry for (R, K)");
    return it->second;
}

ParetoCurve pareto_baseline(std::vector<ParetoPoint> points) {
    if (points.empty()) throw std::invalid_argument("pareto baseline needs at least one point");
    for (const auto& p : points)
        if (!(p.cost > 0.0 && p.variance > 0.0))
            throw std::invalid_argument("pareto points must have positive cost and variance");
    std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        return a.cost != b.cost ? a.cost < b.cost : a.variance < b.variance;
    });
    ParetoCurve curve;
    for (const auto& p : points) {
        if (!curve.points.empty() && p.cost == curve.points.back().cost) continue;
        if (!curve.points.empty() && p.variance >= curve.points.back().variance) continue;  // dominated
        curve.points.push_back(p);
    }
    return curve;
}

double baseline_cost_at(const ParetoCurve& curve, double variance, bool extrapolate) {
    if (curve.points.empty()) throw std::invalid_argument("empty pareto curve");
    if (!(variance > 0.0)) throw std::invalid_argument("variance must be positive");
    const auto& pts = curve.points;
    const double log_v = std::log(variance);

    // Variance decreases along the cost-sorted curve.
    if (variance >= pts.front().variance) {
        if (variance == pts.front().variance) return pts.front().cost;
        if (!extrapolate) throw std::out_of_range("iso-variance point unreachable");
        return std::exp(std::log(pts.front().cost) + (std::log(pts.front().variance) - log_v));
    }
    if (variance <= pts.back().variance) {
        if (variance == pts.back().variance) return pts.back().cost;
        if (!extrapolate) throw std::out_of_range("iso-variance point unreachable");
        return std::exp(std::log(pts.back().cost) + (std::log(pts.back().variance) - log_v));
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (variance <= pts[i].variance && variance >= pts[i + 1].variance) {
            const double lv0 = std::log(pts[i].variance);
            const double lv1 = std::log(pts[i + 1].variance);
            const double lc0 = std::log(pts[i].cost);
            const double lc1 = std::log(pts[i + 1].cost);
            const double frac = (log_v - lv0) / (lv1 - lv0);
            return std::exp(lc0 + frac * (lc1 - lc0));
        }
    }
    throw std::logic_error("pareto curve interpolation fell through");
}

double ecm(const ParetoPoint& method, const ParetoCurve& baseline, bool extrapolate) {
    if (!(method.cost > 0.0)) throw std::invalid_argument("method cost must be positive");
    return baseline_cost_at(baseline, method.variance, extrapolate) / method.cost;
}

double relative_efficiency(double var_uniform, double var_method) {
    if (!(var_uniform > 0.0 && var_method > 0.0))
        throw std::invalid_argument("relative efficiency requires positive variances");
    return var_uniform / var_method;
}

}  // namespace mcvr
