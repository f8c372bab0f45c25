#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "margin.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace syncmargin {

enum class NonlinearityKind { scaled_tanh, saturation, zero };

/// phi with phi(0) = 0, monotone, Lipschitz constant 2/delta.
struct Nonlinearity {
    NonlinearityKind kind = NonlinearityKind::scaled_tanh;
    double delta = 2.0;

    double operator()(double x) const noexcept {
        switch (kind) {
        case NonlinearityKind::scaled_tanh:
            return (2.0 / delta) * std::tanh(x);
        case NonlinearityKind::saturation:
            return (2.0 / delta) * std::clamp(x, -1.0, 1.0);
        case NonlinearityKind::zero:
            break;
        }
        return 0.0;
    }
};

enum class XiDistribution { gaussian, uniform_symmetric };

inline constexpr double kOverflowGuard = 1e100;

struct SimConfig {
    NetworkGraph graph;
    DynamicsParams params;
    Nonlinearity phi;
    std::size_t horizon = 1000;
    std::size_t n_runs = 100;
    std::uint64_t rng_seed = 1;
    XiDistribution xi_distribution = XiDistribution::gaussian;
    double initial_spread = 1.0;
    unsigned threads = 1;
};

struct EnsembleResult {
    std::vector<double> mse_mean; ///< index t = 0..horizon, over non-diverged runs
    std::vector<double> mse_p95;
    std::optional<double> fitted_beta;
    double fitted_floor = 0.0;
    std::size_t fit_points = 0;
    std::size_t diverged_runs = 0;
    std::size_t n_runs = 0;
};

/// (1/2N) sum_{i != j} (x_i - x_j)^2, i.e. sum x_i^2 - (sum x_i)^2 / N, computed
/// in centered form so near-synchronized states keep their relative precision.
inline double mse_pairwise(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s;
}

/// One step of x+ = (aI - g(L + L_R)) x - phi(x) + v. A fresh L_R (one xi per
/// uncertain edge) and fresh noise are drawn per call; `out` must not alias `x`.
inline void step_into(std::span<const double> x, std::span<double> out, const NetworkGraph& graph,
                      const DynamicsParams& params, const Nonlinearity& phi, Rng& rng,
                      XiDistribution xi_dist = XiDistribution::gaussian) {
    const std::size_t n = x.size();
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit_uniform(-1.0, 1.0);
    const double a = params.a;
    for (std::size_t k = 0; k < n; ++k) out[k] = a * x[k] - phi(x[k]);
    if (params.g != 0.0) {
        for (const Edge& e : graph.edges()) {
            double w = e.mu;
            if (e.uncertain()) {
                const double sd = std::sqrt(e.sigma2);
                w += xi_dist == XiDistribution::gaussian ? sd * unit_normal(rng)
                                                         : sd * std::sqrt(3.0) * unit_uniform(rng);
            }
            const double flow = params.g * w * (x[e.i] - x[e.j]);
            out[e.i] -= flow;
            out[e.j] += flow;
        }
    }
    if (params.omega2 > 0.0) {
        const double sd = std::sqrt(params.omega2);
        for (std::size_t k = 0; k < n; ++k) out[k] += sd * unit_normal(rng);
    }
}

inline std::vector<double> step(std::span<const double> x, const NetworkGraph& graph, const DynamicsParams& params,
                                const Nonlinearity& phi, Rng& rng, XiDistribution xi_dist = XiDistribution::gaussian) {
    if (x.size() != graph.n_nodes()) throw ParameterError("state size does not match the graph");
    std::vector<double> out(x.size());
    step_into(x, out, graph, params, phi, rng, xi_dist);
    return out;
}

/// True when every component is finite and within the overflow guard.
inline bool within_guard(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v) && std::abs(v) <= kOverflowGuard; });
}

namespace detail {

struct RunTrace {
    std::vector<double> mse;
    bool diverged = false;
};

inline RunTrace simulate_run(const SimConfig& cfg, std::size_t run) {
    Rng rng = make_rng(cfg.rng_seed, run);
    const std::size_t n = cfg.graph.n_nodes();
    std::uniform_real_distribution<double> init(-cfg.initial_spread, cfg.initial_spread);
    std::vector<double> x(n);
    std::vector<double> next(n);
    for (double& v : x) v = init(rng);

    RunTrace trace;
    trace.mse.reserve(cfg.horizon + 1);
    trace.mse.push_back(mse_pairwise(x));
    for (std::size_t t = 1; t <= cfg.horizon; ++t) {
        step_into(x, next, cfg.graph, cfg.params, cfg.phi, rng, cfg.xi_distribution);
        if (!within_guard(next)) {
            trace.diverged = true;
            break;
        }
        std::swap(x, next);
        trace.mse.push_back(mse_pairwise(x));
    }
    return trace;
}

inline double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

} // namespace detail

/// Floor is the mean of the last 20% of the trace; the decay rate comes from a
/// least-squares fit of log e_t over the leading window where e_t stays above
/// max(10 * floor, 1e-14 * e_0). Needs at least 10 points in that window.
inline void fit_decay(EnsembleResult& r) {
    const auto& e = r.mse_mean;
    if (e.size() < 2) return;
    const std::size_t horizon = e.size() - 1;
    const std::size_t tail = std::max<std::size_t>(1, horizon / 5);
    double floor = 0.0;
    for (std::size_t t = e.size() - tail; t < e.size(); ++t) floor += e[t];
    r.fitted_floor = floor / static_cast<double>(tail);

    const double threshold = std::max(10.0 * r.fitted_floor, 1e-14 * e[0]);
    std::size_t count = 0;
    while (count < e.size() && e[count] > threshold && std::isfinite(e[count])) ++count;
    r.fit_points = count;
    if (count < 10) return;
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
        const double tt = static_cast<double>(t);
        const double y = std::log(e[t]);
        st += tt;
        sy += y;
        stt += tt * tt;
        sty += tt * y;
    }
    const double c = static_cast<double>(count);
    const double slope = (c * sty - st * sy) / (c * stt - st * st);
    r.fitted_beta = std::exp(slope);
}

/// Monte Carlo ensemble. Run r uses the stream make_rng(seed, r), so the
/// result does not depend on `threads`.
inline EnsembleResult run_ensemble(const SimConfig& cfg) {
    if (cfg.horizon < 1) throw ParameterError("horizon must be >= 1");
    if (cfg.n_runs < 1) throw ParameterError("n_runs must be >= 1");
    if (!(cfg.initial_spread >= 0.0)) throw ParameterError("initial_spread must be non-negative");
    cfg.params.validate(true);

    std::vector<detail::RunTrace> traces(cfg.n_runs);
    parallel_for(cfg.n_runs, cfg.threads, [&](std::size_t r) { traces[r] = detail::simulate_run(cfg, r); });

    EnsembleResult out;
    out.n_runs = cfg.n_runs;
    std::vector<const detail::RunTrace*> alive;
    for (const auto& tr : traces) {
        if (tr.diverged)
            ++out.diverged_runs;
        else
            alive.push_back(&tr);
    }
    if (alive.empty()) return out;

    out.mse_mean.resize(cfg.horizon + 1);
    out.mse_p95.resize(cfg.horizon + 1);
    std::vector<double> column(alive.size());
    for (std::size_t t = 0; t <= cfg.horizon; ++t) {
        double s = 0.0;
        for (std::size_t r = 0; r < alive.size(); ++r) {
            column[r] = alive[r]->mse[t];
            s += column[r];
        }
        out.mse_mean[t] = s / static_cast<double>(alive.size());
        out.mse_p95[t] = detail::percentile(column, 0.95);
    }
    fit_decay(out);
    return out;
}

inline std::string to_string(NonlinearityKind k) {
    switch (k) {
    case NonlinearityKind::scaled_tanh:
        return "scaled_tanh";
    case NonlinearityKind::saturation:
        return "saturation";
    case NonlinearityKind::zero:
        return "zero";
    }
    return "?";
}

inline NonlinearityKind nonlinearity_from_string(const std::string& s) {
    if (s == "scaled_tanh" || s == "tanh") return NonlinearityKind::scaled_tanh;
    if (s == "saturation") return NonlinearityKind::saturation;
    if (s == "zero") return NonlinearityKind::zero;
    throw ParameterError("unknown nonlinearity '" + s + "'");
}

inline std::string to_string(XiDistribution d) {
    return d == XiDistribution::gaussian ? "gaussian" : "uniform_symmetric";
}

inline XiDistribution xi_distribution_from_string(const std::string& s) {
    if (s == "gaussian") return XiDistribution::gaussian;
    if (s == "uniform_symmetric" || s == "uniform") return XiDistribution::uniform_symmetric;
    throw ParameterError("unknown xi distribution '" + s + "'");
}

} // namespace syncmargin
