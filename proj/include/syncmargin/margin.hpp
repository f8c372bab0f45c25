#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "error.hpp"
#include "spectral.hpp"

namespace syncmargin {

/// Agent dynamics x+ = a x - phi(x) + v with phi sector-bounded by 2/delta,
/// coupled with gain g; omega2 is the additive noise variance.
struct DynamicsParams {
    double a = 1.05;
    double delta = 2.0;
    double g = 0.001;
    double omega2 = 0.0;

    double a0() const noexcept { return a - 1.0 / delta; }
    /// (1 - 1/delta)^2, the left-hand side of the closed-form condition.
    double lhs() const noexcept { return (1.0 - 1.0 / delta) * (1.0 - 1.0 / delta); }

    void validate(bool allow_zero_gain = false) const {
        if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("a must be positive");
        if (!(delta > 1.0) || !std::isfinite(delta)) throw ParameterError("delta must exceed 1");
        if (allow_zero_gain ? !(g >= 0.0) : !(g > 0.0)) throw ParameterError("coupling gain g must be positive");
        if (!std::isfinite(g)) throw ParameterError("coupling gain g must be finite");
        if (!(omega2 >= 0.0) || !std::isfinite(omega2)) throw ParameterError("omega2 must be non-negative");
    }
};

struct MarginReport {
    double a0 = 0.0;
    double lambda_sup = 0.0;
    double alpha0_sq = 0.0;
    double lhs = 0.0;
    std::optional<double> rho_SM; ///< empty when hat_a^2 >= lhs (margin undefined)
    bool feasible = false;
    double hat_a = 0.0;
    double sigma_eff_sq = 0.0;
};

/// Relative slack used for every strict inequality of the condition.
inline constexpr double kStrictSlack = 1e-12;

inline bool strictly_greater(double x, double y) {
    return x - y > kStrictSlack * std::max(std::abs(x), std::abs(y));
}

/// (a0 - lambda g)^2 + 2 cod tau lambda g^2, evaluated exactly as MarginReport does.
inline double alpha0_sq(double lambda, const DynamicsParams& params, double cod, double tau) {
    const double hat_a = params.a0() - lambda * params.g;
    const double sigma_sq = 2.0 * cod * tau * lambda;
    return hat_a * hat_a + sigma_sq * params.g * params.g;
}

/// Minimizer of alpha0_sq over lambda: a0/g - cod*tau.
inline double lambda_star(const DynamicsParams& params, double cod, double tau) {
    return params.a0() / params.g - cod * tau;
}

/// Whichever of lambda2, lambdaN lies farther from lambda_star; ties pick lambdaN.
inline double lambda_sup(const SpectralSummary& s, const DynamicsParams& params, double cod) {
    const double target = lambda_star(params, cod, s.tau);
    return std::abs(s.lambda2 - target) > std::abs(s.lambdaN - target) ? s.lambda2 : s.lambdaN;
}

/// Margin quantities for a given binding eigenvalue.
inline MarginReport evaluate_margin(double lambda_binding, const DynamicsParams& params, double cod, double tau) {
    MarginReport r;
    r.a0 = params.a0();
    r.lambda_sup = lambda_binding;
    r.lhs = params.lhs();
    r.hat_a = r.a0 - lambda_binding * params.g;
    r.sigma_eff_sq = 2.0 * cod * tau * lambda_binding;
    r.alpha0_sq = r.hat_a * r.hat_a + r.sigma_eff_sq * params.g * params.g;
    r.feasible = strictly_greater(r.lhs, r.alpha0_sq);
    const double denom = r.lhs - r.hat_a * r.hat_a;
    if (strictly_greater(r.lhs, r.hat_a * r.hat_a))
        r.rho_SM = 1.0 - r.sigma_eff_sq * params.g * params.g / denom;
    return r;
}

/// Mean-square synchronization check at lambda_sup.
inline MarginReport check_mss(const SpectralSummary& s, const DynamicsParams& params, double cod) {
    params.validate();
    if (!(cod >= 0.0)) throw ParameterError("cod must be non-negative");
    return evaluate_margin(lambda_sup(s, params, cod), params, cod, s.tau);
}

/// Same condition checked at every nonzero eigenvalue of the spectrum.
inline bool check_mss_all_eigs(const SpectralSummary& s, const DynamicsParams& params, double cod) {
    params.validate();
    if (s.eigenvalues.size() < 2) throw ParameterError("check_mss_all_eigs needs the full spectrum");
    const double lhs = params.lhs();
    for (std::size_t j = 1; j < s.eigenvalues.size(); ++j)
        if (!strictly_greater(lhs, alpha0_sq(s.eigenvalues[j], params, cod, s.tau))) return false;
    return true;
}

/// f(p) = (p - 1/delta)(1/p - 1/delta), maximal at p = 1 where it equals (1 - 1/delta)^2.
inline double lyapunov_scalar_gap(double p, double delta) { return (p - 1.0 / delta) * (1.0 / p - 1.0 / delta); }

struct ExistenceResult {
    bool satisfiable = false;
    std::optional<double> witness; ///< a p in (0, delta) with f(p) > alpha0_sq
};

/// Searches for 0 < p < delta with f(p) > alpha0_sq by golden-section
/// maximization of f on (0, delta).
inline ExistenceResult existence_p_condition(double alpha0_sq_value, double delta) {
    if (!(delta > 1.0)) throw ParameterError("delta must exceed 1");
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0;
    double hi = delta;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = lyapunov_scalar_gap(x1, delta);
    double f2 = lyapunov_scalar_gap(x2, delta);
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = lyapunov_scalar_gap(x2, delta);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = lyapunov_scalar_gap(x1, delta);
        }
    }
    const double p = 0.5 * (lo + hi);
    ExistenceResult out;
    out.satisfiable = strictly_greater(lyapunov_scalar_gap(p, delta), alpha0_sq_value);
    if (out.satisfiable) out.witness = p;
    return out;
}

struct CriticalEigenvalues {
    double lambda2_star = 0.0;
    double lambdaN_star = 0.0;
};

/// Zero-dispersion critical eigenvalues: lambda2* = (a-1)/g, lambdaN* = (a+1)/g - 2/(g delta).
inline CriticalEigenvalues critical_eigenvalues(const DynamicsParams& params) {
    params.validate();
    return {(params.a - 1.0) / params.g, (params.a + 1.0) / params.g - 2.0 / (params.g * params.delta)};
}

struct OptimalGain {
    double g_star = 0.0;
    MarginReport report; ///< evaluated with lambda_sup = lambda2
};

/// g* = 2 a0 / (max{lambdaN, lambda2 + 2 cod tau} + lambda2 + 2 cod tau).
/// Throws ParameterError when a0 <= 0. An infeasible g* is still returned,
/// with report.feasible == false.
inline OptimalGain optimal_gain(const SpectralSummary& s, double a, double delta, double cod) {
    const DynamicsParams probe{a, delta, 1.0, 0.0};
    probe.validate();
    if (!(probe.a0() > 0.0)) throw ParameterError("optimal gain needs a0 = a - 1/delta > 0");
    if (!(cod >= 0.0)) throw ParameterError("cod must be non-negative");
    const double shift = 2.0 * cod * s.tau;
    const double chi = std::max(s.lambdaN, s.lambda2 + shift);
    OptimalGain out;
    out.g_star = 2.0 * probe.a0() / (chi + s.lambda2 + shift);
    const DynamicsParams at_opt{a, delta, out.g_star, 0.0};
    out.report = evaluate_margin(s.lambda2, at_opt, cod, s.tau);
    return out;
}

struct SaddleGain {
    double g_e = 0.0;
    double alpha0_sq = 0.0; ///< common value a0^2 - 4 l2 lN a0^2 / (lN + l2 + 2 cod tau)^2
};

/// Gain equalizing alpha0_sq at lambda2 and lambdaN; empty when lambda2 == lambdaN.
inline std::optional<SaddleGain> saddle_gain(const SpectralSummary& s, double a, double delta, double cod) {
    const DynamicsParams probe{a, delta, 1.0, 0.0};
    probe.validate();
    if (s.lambdaN == s.lambda2) return std::nullopt;
    const double a0 = probe.a0();
    const double ct = cod * s.tau;
    const double mean_lambda = 0.5 * (s.lambda2 + s.lambdaN);
    const double denom = s.lambdaN + s.lambda2 + 2.0 * ct;
    return SaddleGain{a0 / (mean_lambda + ct), a0 * a0 - 4.0 * s.lambda2 * s.lambdaN * a0 * a0 / (denom * denom)};
}

} // namespace syncmargin
