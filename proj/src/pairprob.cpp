#include "mcvr/pairprob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mcvr/rng.hpp"
#include "mcvr/schedule.hpp"

namespace mcvr {

void PairInstance::validate() const {
    if (y.size() < 2) throw std::invalid_argument("pair instance needs at least 2 items");
    for (const auto& v : y)
        if (v.size() != dim()) throw std::invalid_argument("pair instance vectors must share one dimension");
    if (!timesteps.empty() && timesteps.size() != y.size())
        throw std::invalid_argument("timesteps must match item count");
    if (!weights.empty() && weights.size() != y.size())
        throw std::invalid_argument("weights must match item count");
    for (double w : weights)
        if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("weights must be nonnegative and finite");
}

std::vector<double> PairInstance::target_sum() const {
    std::vector<double> total(dim(), 0.0);
    for (const auto& v : y)
        for (std::size_t d = 0; d < total.size(); ++d) total[d] += v[d];
    return total;
}

std::vector<double> PairMatrix::marginals() const {
    std::vector<double> pi(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) pi[i] += at(i, j);
    return pi;
}

void PairMatrix::validate() const {
    if (n < 2 || q.size() != n * n) throw std::invalid_argument("pair matrix shape is invalid");
    double upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (at(i, i) != 0.0) throw std::invalid_argument("pair matrix diagonal must be zero");
        for (std::size_t j = i + 1; j < n; ++j) {
            if (at(i, j) < 0.0) throw std::invalid_argument("pair probabilities must be nonnegative");
            if (at(i, j) != at(j, i)) throw std::invalid_argument("pair matrix must be symmetric");
            upper += at(i, j);
        }
    }
    if (std::abs(upper - 1.0) > 1e-9) throw std::invalid_argument("pair probabilities must sum to 1");
    for (double pi : marginals())
        if (!(pi > 0.0 && pi <= 1.0 + 1e-12))
            throw std::invalid_argument("pair matrix marginals must lie in (0, 1]");
}

std::string pair_kind_name(PairKind kind) {
    switch (kind) {
        case PairKind::kIid: return "iid";
        case PairKind::kStratIndex: return "strat_index";
        case PairKind::kIw: return "iw";
        case PairKind::kIwStrat: return "iw_strat";
        case PairKind::kSinkhorn: return "sinkhorn";
    }
    throw std::invalid_argument("unknown pair kind");
}

PairKind pair_kind_from_name(const std::string& name) {
    if (name == "iid") return PairKind::kIid;
    if (name == "strat_index") return PairKind::kStratIndex;
    if (name == "iw") return PairKind::kIw;
    if (name == "iw_strat") return PairKind::kIwStrat;
    if (name == "sinkhorn") return PairKind::kSinkhorn;
    throw std::invalid_argument("unknown pair kind '" + name + "'");
}

std::vector<double> ht_estimate(const PairInstance& instance, const PairMatrix& matrix,
                                std::size_t i, std::size_t j) {
    if (i >= instance.size() || j >= instance.size() || i == j)
        throw std::invalid_argument("pair indices out of range");
    const auto pi = matrix.marginals();
    if (pi[i] <= 0.0 || pi[j] <= 0.0) throw std::runtime_error("zero marginal inclusion probability");
    std::vector<double> out(instance.dim());
    for (std::size_t d = 0; d < out.size(); ++d)
        out[d] = instance.y[i][d] / pi[i] + instance.y[j][d] / pi[j];
    return out;
}

double ht_variance(const PairInstance& instance, const PairMatrix& matrix) {
    instance.validate();
    if (matrix.n != instance.size()) throw std::invalid_argument("matrix and instance sizes differ");
    const auto pi = matrix.marginals();
    for (std::size_t i = 0; i < pi.size(); ++i) {
        if (pi[i] > 0.0) continue;
        double norm = 0.0;
        for (double v : instance.y[i]) norm += v * v;
        if (norm > 0.0)
            throw std::runtime_error("zero marginal on an item with nonzero target");
    }
    const auto mu = instance.target_sum();
    double variance = 0.0;
    for (std::size_t i = 0; i < matrix.n; ++i) {
        for (std::size_t j = i + 1; j < matrix.n; ++j) {
            const double prob = matrix.at(i, j);
            if (prob == 0.0) continue;
            double sq = 0.0;
            for (std::size_t d = 0; d < mu.size(); ++d) {
                const double diff = instance.y[i][d] / pi[i] + instance.y[j][d] / pi[j] - mu[d];
                sq += diff * diff;
            }
            variance += prob * sq;
        }
    }
    return variance;
}

namespace {

PairMatrix normalized_from_upper(std::size_t n, const std::vector<double>& upper_weights) {
    // upper_weights indexes unordered pairs in (i, j>i) order.
    double total = std::accumulate(upper_weights.begin(), upper_weights.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("pair construction has zero total mass");
    PairMatrix matrix;
    matrix.n = n;
    matrix.q.assign(n * n, 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++idx) {
            const double p = upper_weights[idx] / total;
            matrix.at(i, j) = p;
            matrix.at(j, i) = p;
        }
    }
    return matrix;
}

// Two halves of (approximately) equal weight mass, split by cumulative
// weight; each index goes to the half containing its mass midpoint.
std::vector<int> mass_halves(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<int> half(n, 0);
    double before = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double midpoint = before + 0.5 * weights[i];
        half[i] = midpoint <= 0.5 * total ? 0 : 1;
        before += weights[i];
    }
    // Degenerate mass profiles can empty one half; force both nonempty.
    if (std::count(half.begin(), half.end(), 0) == 0) half.front() = 0;
    if (std::count(half.begin(), half.end(), 1) == 0) half.back() = 1;
    return half;
}

}  // namespace

PairMatrix build_pair_matrix(PairKind kind, const PairInstance& instance) {
    instance.validate();
    const std::size_t n = instance.size();
    const std::size_t pairs = n * (n - 1) / 2;
    std::vector<double> upper(pairs, 0.0);

    const bool needs_weights = kind == PairKind::kIw || kind == PairKind::kIwStrat;
    if (needs_weights) {
        if (instance.weights.size() != n)
            throw std::invalid_argument("IW pair constructions need per-item weights");
        if (std::accumulate(instance.weights.begin(), instance.weights.end(), 0.0) <= 0.0)
            throw std::invalid_argument("IW pair constructions need a nonzero weight profile");
    }

    switch (kind) {
        case PairKind::kIid: {
            std::fill(upper.begin(), upper.end(), 1.0);
            break;
        }
        case PairKind::kStratIndex: {
            const std::size_t split = n / 2;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j, ++idx)
                    upper[idx] = (i < split) != (j < split) ? 1.0 : 0.0;
            break;
        }
        case PairKind::kIw: {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j, ++idx)
                    upper[idx] = instance.weights[i] * instance.weights[j];
            break;
        }
        case PairKind::kIwStrat: {
            const auto half = mass_halves(instance.weights);
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j, ++idx)
                    upper[idx] = half[i] != half[j] ? instance.weights[i] * instance.weights[j] : 0.0;
            break;
        }
        case PairKind::kSinkhorn:
            throw std::invalid_argument("use sinkhorn_optimal for the Sinkhorn construction");
    }
    PairMatrix matrix = normalized_from_upper(n, upper);
    matrix.validate();
    return matrix;
}

SinkhornError::SinkhornError(double residual_in)
    : std::runtime_error("sinkhorn iteration did not reach tolerance; marginal residual = " +
                         std::to_string(residual_in)),
      residual(residual_in) {}

PairMatrix sinkhorn_optimal(const PairInstance& instance, const SinkhornOptions& options) {
    instance.validate();
    const std::size_t n = instance.size();

    std::vector<double> norms(n, 0.0);
    double norm_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (double v : instance.y[i]) sq += v * v;
        norms[i] = std::sqrt(sq);
        norm_total += norms[i];
    }
    if (norm_total <= 0.0) throw std::invalid_argument("sinkhorn needs a nonzero target set");

    if (n == 2) {
        // Only one unordered pair exists.
        PairMatrix matrix;
        matrix.n = 2;
        matrix.q = {0.0, 1.0, 1.0, 0.0};
        return matrix;
    }

    // Target marginals sum to 2: two inclusions per draw.
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = 2.0 * norms[i] / norm_total;

    // Cost penalizes aligned scaled contributions.
    std::vector<double> cost(n * n, 0.0);
    std::vector<double> off_diag;
    off_diag.reserve(n * (n - 1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double dot = 0.0;
            for (std::size_t d = 0; d < instance.dim(); ++d)
                dot += (instance.y[i][d] / target[i]) * (instance.y[j][d] / target[j]);
            cost[i * n + j] = dot;
            off_diag.push_back(std::abs(dot));
        }
    }
    std::sort(off_diag.begin(), off_diag.end());
    const std::size_t pct = static_cast<std::size_t>(0.95 * static_cast<double>(off_diag.size() - 1));
    double scale = off_diag[pct];
    if (scale <= 0.0) scale = 1.0;

    std::vector<double> kernel(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) kernel[i * n + j] = std::exp(-options.beta * cost[i * n + j] / scale);

    std::vector<double> u(n, 1.0), v(n, 1.0);
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += kernel[i * n + j] * v[j];
            u[i] = row > 0.0 ? target[i] / row : 0.0;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < n; ++i) col += kernel[i * n + j] * u[i];
            v[j] = col > 0.0 ? target[j] / col : 0.0;
        }
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += u[i] * kernel[i * n + j] * v[j];
            residual = std::max(residual, std::abs(row - target[i]));
        }
        if (residual < options.tol) break;
    }
    if (residual >= options.tol) throw SinkhornError(residual);

    PairMatrix matrix;
    matrix.n = n;
    matrix.q.assign(n * n, 0.0);
    double upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m_ij = u[i] * kernel[i * n + j] * v[j];
            const double m_ji = u[j] * kernel[j * n + i] * v[i];
            const double sym = 0.5 * (m_ij + m_ji);
            matrix.at(i, j) = sym;
            matrix.at(j, i) = sym;
            upper += sym;
        }
    }
    for (auto& value : matrix.q) value /= upper;
    matrix.validate();
    return matrix;
}

PairInstance make_pair_family_instance(std::size_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("family instance needs at least 2 items");
    RngStream rng = RngStream(seed).child(kTagInstance, 0);
    const double phase = 2.0 * 3.141592653589793 * rng.uniform();
    const double span = 3.141592653589793 * (0.75 + 0.5 * rng.uniform());
    const double jitter = 0.1;

    PairInstance instance;
    instance.timesteps.resize(n);
    instance.weights.resize(n);
    instance.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        instance.timesteps[i] = t;
        instance.weights[i] = weight_sds(t, default_schedule());
        const double amp = instance.weights[i] * std::exp(jitter * rng.normal()) / static_cast<double>(n);
        const double angle = phase + span * t;
        instance.y[i] = {amp * std::cos(angle), amp * std::sin(angle)};
    }
    return instance;
}

nlohmann::json pair_matrix_to_json(const PairMatrix& matrix, const std::string& kind,
                                   double variance, double ecm_vs_iid) {
    return nlohmann::json{{"kind", kind},
                          {"N", matrix.n},
                          {"marginals", matrix.marginals()},
                          {"variance", variance},
                          {"ecm_vs_iid", ecm_vs_iid}};
}

}  // namespace mcvr
