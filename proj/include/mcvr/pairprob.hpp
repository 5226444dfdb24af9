#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace mcvr {

// N per-timestep targets y_i = p_i·g_i for the two-draw without-replacement
// analysis; timesteps and weights feed the IW/stratified constructions.
struct PairInstance {
    std::vector<std::vector<double>> y;
    std::vector<double> timesteps;
    std::vector<double> weights;

    std::size_t size() const { return y.size(); }
    std::size_t dim() const { return y.empty() ? 0 : y.front().size(); }
    std::vector<double> target_sum() const;

    void validate() const;
};

// Symmetric zero-diagonal probability matrix over unordered index pairs;
// the entries above the diagonal sum to 1.
struct PairMatrix {
    std::size_t n = 0;
    std::vector<double> q;  // row-major n*n

    double at(std::size_t i, std::size_t j) const { return q[i * n + j]; }
    double& at(std::size_t i, std::size_t j) { return q[i * n + j]; }
    // Marginal inclusion probabilities π_i = Σ_{j≠i} q(i,j).
    std::vector<double> marginals() const;

    void validate() const;
};

enum class PairKind { kIid, kStratIndex, kIw, kIwStrat, kSinkhorn };

std::string pair_kind_name(PairKind kind);
PairKind pair_kind_from_name(const std::string& name);

// Horvitz-Thompson total estimate y_i/π_i + y_j/π_j for a sampled pair.
std::vector<double> ht_estimate(const PairInstance& instance, const PairMatrix& matrix,
                                std::size_t i, std::size_t j);

// Closed-form variance Σ_{i<j} q(i,j)·‖μ̂_ij − μ_y‖² by pair enumeration.
double ht_variance(const PairInstance& instance, const PairMatrix& matrix);

// The four classical constructions (Sinkhorn has its own solver below).
PairMatrix build_pair_matrix(PairKind kind, const PairInstance& instance);

struct SinkhornOptions {
    double beta = 5.0;
    std::size_t max_iters = 10000;
    double tol = 1e-9;
};

// Thrown when the scaling iteration fails to reach the marginal tolerance.
struct SinkhornError : std::runtime_error {
    explicit SinkhornError(double residual_in);
    double residual;
};

// Entropy-regularized variance-minimizing allocation with target marginals
// π_i ∝ ‖y_i‖₂ (normalized to Σπ = 2). Cost C_ij = (y_i/π_i)ᵀ(y_j/π_j),
// kernel exp(-β·C/scale) with scale the 95th percentile of off-diagonal |C|.
PairMatrix sinkhorn_optimal(const PairInstance& instance, const SinkhornOptions& options = {});

// Instance family for ordering experiments: n items on the timestep grid with
// the synthetic teacher-weight profile and smoothly rotating 2-d directions.
PairInstance make_pair_family_instance(std::size_t n, std::uint64_t seed);

nlohmann::json pair_matrix_to_json(const PairMatrix& matrix, const std::string& kind,
                                   double variance, double ecm_vs_iid);

}  // namespace mcvr
