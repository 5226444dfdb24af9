#include "mcvr/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mcvr {

void BaseDistribution::validate() const {
    if (!(t_min < t_max)) throw std::invalid_argument("base distribution requires t_min < t_max");
    if (t_min < 0.0 || t_max > 1.0) throw std::invalid_argument("base distribution support must lie in [0, 1]");
}

double Proposal::pdf(double t) const {
    if (t < base.t_min || t > base.t_max) return 0.0;
    const double h = step();
    const double x = (t - base.t_min) / h;
    auto i = static_cast<std::size_t>(x);
    if (i >= grid.size() - 1) i = grid.size() - 2;
    const double frac = x - static_cast<double>(i);
    return density[i] + frac * (density[i + 1] - density[i]);
}

void Proposal::validate() const {
    base.validate();
    if (grid.size() < 2 || grid.size() != density.size() || grid.size() != cdf.size())
        throw std::invalid_argument("proposal tables are inconsistent");
    if (floor_mix < 0.0 || floor_mix >= 1.0) throw std::invalid_argument("floor_mix must lie in [0, 1)");
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        if (density[i] < 0.0) throw std::invalid_argument("proposal density is negative");
        if (cdf[i + 1] < cdf[i]) throw std::invalid_argument("proposal CDF is decreasing");
        // Strictly increasing wherever the density is positive.
        if (cdf[i + 1] <= cdf[i] && (density[i] > 0.0 || density[i + 1] > 0.0))
            throw std::invalid_argument("proposal CDF is flat on positive-density segment");
        integral += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
    }
    if (std::abs(integral - 1.0) > 1e-9) throw std::invalid_argument("proposal density does not integrate to 1");
    if (std::abs(cdf.front()) > 1e-12 || std::abs(cdf.back() - 1.0) > 1e-12)
        throw std::invalid_argument("proposal CDF endpoints must be 0 and 1");
}

Proposal build_proposal(const BaseDistribution& base,
                        const std::function<double(double)>& weight_profile,
                        std::size_t grid_size,
                        double floor_mix) {
    base.validate();
    if (grid_size < 2) throw std::invalid_argument("grid_size must be at least 2");
    if (floor_mix < 0.0 || floor_mix >= 1.0) throw std::invalid_argument("floor_mix must lie in [0, 1)");

    Proposal out;
    out.base = base;
    out.floor_mix = floor_mix;
    out.grid.resize(grid_size);
    out.density.resize(grid_size);
    out.cdf.resize(grid_size);

    const double h = base.span() / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double t = (i + 1 == grid_size) ? base.t_max : base.t_min + h * static_cast<double>(i);
        out.grid[i] = t;
        const double w = weight_profile ? weight_profile(t) : 1.0;
        if (!std::isfinite(w)) throw std::invalid_argument("weight profile is not finite on the support");
        if (w < 0.0) throw std::invalid_argument("weight profile is negative on the support");
        // Base density is uniform, so the constant p factor cancels in normalization.
        out.density[i] = (1.0 - floor_mix) * w + floor_mix;
    }

    double mass = 0.0;
    out.cdf[0] = 0.0;
    for (std::size_t i = 0; i + 1 < grid_size; ++i) {
        mass += 0.5 * (out.density[i] + out.density[i + 1]) * h;
        out.cdf[i + 1] = mass;
    }
    if (mass <= 0.0) throw std::runtime_error("degenerate proposal: weight profile vanishes and floor_mix is 0");
    for (std::size_t i = 0; i < grid_size; ++i) {
        out.density[i] /= mass;
        out.cdf[i] /= mass;
    }
    out.cdf.back() = 1.0;
    return out;
}

double inverse_cdf(const Proposal& proposal, double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("quantile must lie in [0, 1]");
    const auto& cdf = proposal.cdf;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.begin()) return proposal.grid.front();
    const auto j = static_cast<std::size_t>(it - cdf.begin());
    const double lo = cdf[j - 1];
    const double hi = cdf[j];
    // Flat (zero-density) segments map to their left edge, keeping monotonicity.
    if (hi <= lo) return proposal.grid[j - 1];
    const double frac = (u - lo) / (hi - lo);
    const double t = proposal.grid[j - 1] + frac * (proposal.grid[j] - proposal.grid[j - 1]);
    return std::clamp(t, proposal.base.t_min, proposal.base.t_max);
}

double importance_weight(const Proposal& proposal, double t) {
    const double p = proposal.base.pdf(t);
    if (p == 0.0) return 0.0;
    const double q = proposal.pdf(t);
    if (q <= 0.0) throw std::runtime_error("proposal violates support condition: q(t) = 0 where p(t) > 0");
    return p / q;
}

QuantileBatch stratified_quantiles(std::size_t strata, RngStream& rng) {
    if (strata < 1) throw std::invalid_argument("stratum count must be positive");
    QuantileBatch batch;
    batch.strata = strata;
    batch.u.resize(strata);
    const double m = static_cast<double>(strata);
    for (std::size_t k = 0; k < strata; ++k)
        batch.u[k] = (static_cast<double>(k) + rng.uniform()) / m;
    return batch;
}

int snap_to_grid(double t, int grid_size) {
    if (grid_size < 1) throw std::invalid_argument("grid size must be positive");
    const double x = t * static_cast<double>(grid_size - 1);
    const auto idx = static_cast<long long>(std::ceil(x - 0.5));
    return static_cast<int>(std::clamp(idx, 0LL, static_cast<long long>(grid_size - 1)));
}

nlohmann::json proposal_to_json(const Proposal& proposal) {
    return nlohmann::json{{"t_min", proposal.base.t_min},
                          {"t_max", proposal.base.t_max},
                          {"grid", proposal.grid},
                          {"density", proposal.density},
                          {"floor_mix", proposal.floor_mix}};
}

Proposal proposal_from_json(const nlohmann::json& doc) {
    Proposal out;
    out.base.t_min = doc.at("t_min").get<double>();
    out.base.t_max = doc.at("t_max").get<double>();
    out.grid = doc.at("grid").get<std::vector<double>>();
    out.density = doc.at("density").get<std::vector<double>>();
    out.floor_mix = doc.at("floor_mix").get<double>();
    if (out.grid.size() < 2 || out.grid.size() != out.density.size())
        throw std::invalid_argument("proposal document tables are inconsistent");
    // Rebuild the CDF from the stored density so the tabulation rule is shared.
    out.cdf.assign(out.grid.size(), 0.0);
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < out.grid.size(); ++i) {
        mass += 0.5 * (out.density[i] + out.density[i + 1]) * (out.grid[i + 1] - out.grid[i]);
        out.cdf[i + 1] = mass;
    }
    if (mass <= 0.0) throw std::runtime_error("degenerate proposal: stored density has zero mass");
    for (auto& c : out.cdf) c /= mass;
    for (auto& d : out.density) d /= mass;
    out.cdf.back() = 1.0;
    out.validate();
    return out;
}

}  // namespace mcvr
