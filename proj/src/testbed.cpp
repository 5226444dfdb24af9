#include "mcvr/testbed.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mcvr/schedule.hpp"

namespace mcvr {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double gaussian_bump(double t, double center, double width) {
    const double z = (t - center) / width;
    return std::exp(-0.5 * z * z);
}

// Composite Simpson quadrature on [lo, hi].
template <typename Fn>
double simpson(Fn&& fn, double lo, double hi, int intervals = 20000) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (hi - lo) / intervals;
    double sum = fn(lo) + fn(hi);
    for (int i = 1; i < intervals; ++i) sum += fn(lo + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

}  // namespace

double toy_profile(double t) {
    return 0.05 + gaussian_bump(t, 0.7, 0.03) + 0.2 * gaussian_bump(t, 0.25, 0.1);
}

Task toy_integrand(double noise_scale) {
    if (noise_scale < 0.0) throw std::invalid_argument("noise scale must be nonnegative");
    Task task;
    task.name = "toy";
    task.dim = 2;
    task.noise_dim = 2;
    task.base = {0.0, 1.0};
    task.cost_model = CostModel::parametric(1.0);
    task.render_sampler = [](RngStream&) { return RenderState{}; };
    task.contribution = [noise_scale](const RenderState&, double t, std::span<const double> eps) {
        const double f = toy_profile(t);
        return std::vector<double>{f * std::cos(kPi * t) + noise_scale * f * eps[0],
                                   f * std::sin(kPi * t) + noise_scale * f * eps[1]};
    };
    task.weight_profile = toy_profile;

    TaskAnalytic analytic;
    analytic.true_mean = {simpson([](double t) { return toy_profile(t) * std::cos(kPi * t); }, 0.0, 1.0),
                          simpson([](double t) { return toy_profile(t) * std::sin(kPi * t); }, 0.0, 1.0)};
    analytic.sigma_a2 = 0.0;
    // Total single-draw variance: E‖g‖² - ‖mean‖² with E‖g‖²|t = f²(1+2ρ²).
    const double second_moment =
        (1.0 + 2.0 * noise_scale * noise_scale) *
        simpson([](double t) { return toy_profile(t) * toy_profile(t); }, 0.0, 1.0);
    analytic.sigma_b2 = second_moment - (analytic.true_mean[0] * analytic.true_mean[0] +
                                         analytic.true_mean[1] * analytic.true_mean[1]);
    task.analytic = analytic;
    return task;
}

Task hierarchical_task(double sigma_a2, double sigma_b2, std::size_t dim) {
    if (sigma_a2 < 0.0 || sigma_b2 < 0.0) throw std::invalid_argument("variances must be nonnegative");
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    Task task;
    task.name = "hier";
    task.dim = dim;
    task.noise_dim = dim;
    task.base = {0.0, 1.0};
    task.cost_model = CostModel::parametric(1.0);
    const double a_scale = std::sqrt(sigma_a2 / static_cast<double>(dim));
    const double b_scale = std::sqrt(sigma_b2 / static_cast<double>(dim));
    task.render_sampler = [dim, a_scale](RngStream& rng) {
        RenderState state(dim);
        for (auto& v : state) v = a_scale * rng.normal();
        return state;
    };
    task.contribution = [b_scale](const RenderState& state, double, std::span<const double> eps) {
        std::vector<double> g(state.begin(), state.end());
        for (std::size_t d = 0; d < g.size(); ++d) g[d] += b_scale * eps[d];
        return g;
    };
    task.analytic = TaskAnalytic{std::vector<double>(dim, 0.0), sigma_a2, sigma_b2};
    return task;
}

Task polynomial_task() {
    Task task;
    task.name = "poly";
    task.dim = 3;
    task.noise_dim = 1;
    task.base = {0.0, 1.0};
    task.cost_model = CostModel::parametric(1.0);
    task.render_sampler = [](RngStream&) { return RenderState{}; };
    task.contribution = [](const RenderState&, double t, std::span<const double>) {
        return std::vector<double>{t, t * t, std::sin(2.0 * kPi * t)};
    };
    task.weight_profile = [](double t) { return weight_sds(t, default_schedule()); };
    TaskAnalytic analytic;
    analytic.true_mean = {0.5, 1.0 / 3.0, 0.0};
    analytic.sigma_a2 = 0.0;
    analytic.sigma_b2 = (1.0 / 3.0 - 0.25) + (1.0 / 5.0 - 1.0 / 9.0) + 0.5;
    task.analytic = analytic;
    return task;
}

Task sds_like_task(const SdsLikeParams& params) {
    if (params.dim < 2) throw std::invalid_argument("sdslike task needs dim >= 2");
    Task task;
    task.name = "sdslike";
    task.dim = params.dim;
    task.noise_dim = params.dim;
    task.base = {params.t_min, params.t_max};
    task.cost_model = CostModel::parametric(1.0);
    const std::size_t dim = params.dim;
    const double a = params.direction_scale;
    const double b = params.render_scale;
    const double c = params.noise_scale;
    task.render_sampler = [dim, b](RngStream& rng) {
        RenderState state(dim);
        const double scale = b / std::sqrt(static_cast<double>(dim));
        for (auto& v : state) v = scale * rng.normal();
        return state;
    };
    task.contribution = [dim, a, c](const RenderState& state, double t, std::span<const double> eps) {
        const double w = weight_sds(t, default_schedule());
        const double noise_scale = c / std::sqrt(static_cast<double>(dim));
        std::vector<double> g(dim);
        for (std::size_t d = 0; d < dim; ++d) g[d] = state[d] + noise_scale * eps[d];
        // Deterministic drift rotates with t in the first two coordinates.
        g[0] += a * std::cos(kPi * t);
        g[1] += a * std::sin(kPi * t);
        for (auto& v : g) v *= w;
        return g;
    };
    task.weight_profile = [](double t) { return weight_sds(t, default_schedule()); };

    const double span = params.t_max - params.t_min;
    TaskAnalytic analytic;
    analytic.true_mean.assign(dim, 0.0);
    analytic.true_mean[0] = simpson([&](double t) { return weight_sds(t, default_schedule()) *
                                                           std::cos(kPi * t); },
                                    params.t_min, params.t_max) *
                            a / span;
    analytic.true_mean[1] = simpson([&](double t) { return weight_sds(t, default_schedule()) *
                                                           std::sin(kPi * t); },
                                    params.t_min, params.t_max) *
                            a / span;
    task.analytic = analytic;
    return task;
}

Proposal oracle_proposal(const Task& task, std::size_t bins, std::size_t samples_per_bin,
                         std::uint64_t seed) {
    if (bins < 2) throw std::invalid_argument("oracle proposal needs at least 2 bins");
    if (samples_per_bin == 0) throw std::invalid_argument("oracle proposal needs samples per bin");

    const double lo = task.base.t_min;
    const double width = task.base.span() / static_cast<double>(bins);
    std::vector<double> centers(bins), profile(bins);
    const RngStream root = RngStream(seed);
    std::vector<double> eps(task.noise_dim);
    for (std::size_t b = 0; b < bins; ++b) {
        centers[b] = lo + (static_cast<double>(b) + 0.5) * width;
        RngStream bin_rng = root.child(kTagInstance, b);
        double mean_sq = 0.0;
        for (std::size_t s = 0; s < samples_per_bin; ++s) {
            const double t = lo + (static_cast<double>(b) + bin_rng.uniform()) * width;
            RngStream render_rng = bin_rng.child(kTagRender, s);
            const RenderState state = task.render_sampler(render_rng);
            RngStream eps_rng = bin_rng.child(kTagNoise, s);
            eps_rng.fill_normal(eps);
            const auto g = task.contribution(state, t, eps);
            double sq = 0.0;
            for (double v : g) sq += v * v;
            mean_sq += sq;
        }
        profile[b] = std::sqrt(mean_sq / static_cast<double>(samples_per_bin));
    }

    // Piecewise-constant binned profile; estimated profiles carry the 1e-3
    // support floor the unbiasedness argument requires.
    auto binned = [lo, width, bins, profile](double t) {
        auto b = static_cast<std::size_t>((t - lo) / width);
        if (b >= bins) b = bins - 1;
        return profile[b];
    };
    return build_proposal(task.base, binned, kCdfGridSize, 1e-3);
}

namespace {

std::map<std::string, double> parse_params(const std::string& body, const std::string& reference) {
    std::map<std::string, double> params;
    std::stringstream stream(body);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("bad task parameter '" + item + "' in '" + reference + "'");
        const std::string key = item.substr(0, eq);
        try {
            params[key] = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad task parameter value in '" + reference + "'");
        }
    }
    return params;
}

double take(std::map<std::string, double>& params, const std::string& key, double fallback) {
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double value = it->second;
    params.erase(it);
    return value;
}

}  // namespace

Task make_task(const std::string& reference) {
    std::string name = reference;
    std::string body;
    const auto brace = reference.find('{');
    if (brace != std::string::npos) {
        if (reference.back() != '}')
            throw std::invalid_argument("task reference '" + reference + "' is missing '}'");
        name = reference.substr(0, brace);
        body = reference.substr(brace + 1, reference.size() - brace - 2);
    }
    auto params = parse_params(body, reference);

    Task task;
    if (name == "toy") {
        task = toy_integrand(take(params, "rho", 0.1));
    } else if (name == "hier") {
        task = hierarchical_task(take(params, "sigmaA2", 1.0), take(params, "sigmaB2", 4.0),
                                 static_cast<std::size_t>(take(params, "dim", 4)));
    } else if (name == "poly") {
        task = polynomial_task();
    } else if (name == "sdslike") {
        SdsLikeParams p;
        p.dim = static_cast<std::size_t>(take(params, "dim", 4));
        p.direction_scale = take(params, "a", 1.0);
        p.render_scale = take(params, "b", 0.5);
        p.noise_scale = take(params, "c", 0.5);
        p.t_min = take(params, "tmin", 0.02);
        p.t_max = take(params, "tmax", 0.98);
        task = sds_like_task(p);
    } else {
        throw std::invalid_argument("unknown task name '" + name + "'");
    }
    if (!params.empty())
        throw std::invalid_argument("unknown parameter '" + params.begin()->first + "' for task '" +
                                    name + "'");
    return task;
}

}  // namespace mcvr
