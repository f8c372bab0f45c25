#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "margin.hpp"
#include "matrix.hpp"

namespace syncmargin {

struct RiccatiOptions {
    double r = 1e-4; ///< R_P = r * I
    double tolerance = 1e-10;
    int max_iterations = 10000;
    std::size_t max_nodes = 30;
};

struct RiccatiResult {
    bool converged = false;
    std::optional<Matrix> P; ///< (N-1)x(N-1) fixed point, set on convergence
    int iterations = 0;
    std::string reason; ///< why iteration stopped without converging
};

/// An uncertain edge as seen by the oracle: endpoints and weight variance.
struct UncertainLink {
    NodeIndex i;
    NodeIndex j;
    double sigma2;
};

/// Uncertain edges recovered from the off-diagonal pattern of L_U, each with
/// variance cod * mu.
inline std::vector<UncertainLink> uncertain_links(const Matrix& L_U, double cod) {
    std::vector<UncertainLink> links;
    for (std::size_t i = 0; i < L_U.rows(); ++i)
        for (std::size_t j = i + 1; j < L_U.cols(); ++j)
            if (L_U(i, j) != 0.0) links.push_back({i, j, cod * -L_U(i, j)});
    return links;
}

/// Fixed-point iteration, from P = I, of the reduced-coordinate matrix condition
///
///   P = E[A0ᵀ P A0] + R_P + I/delta + E[A0ᵀ P (delta I - P)^-1 P A0],
///   A0 = a0 I - g Uᵀ (L + L_R) U,
///
/// with both expectations in closed form: for symmetric M,
///   E[A0ᵀ M A0] = Ā0ᵀ M Ā0 + g² Σ σ² (ℓ̂ᵀ M ℓ̂) ℓ̂ ℓ̂ᵀ,  ℓ̂ = Uᵀ(e_i - e_j).
///
/// Divergence (delta I - P losing positive definiteness, non-finite entries or
/// an exhausted iteration budget) is reported, never thrown.
inline RiccatiResult riccati_oracle(const Matrix& L, const std::vector<UncertainLink>& links, const Matrix& U,
                                    const DynamicsParams& params, RiccatiOptions opts = {}) {
    params.validate(true);
    const std::size_t n = L.rows();
    if (n < 2 || n > opts.max_nodes)
        throw ParameterError("riccati oracle is for 2 <= N <= " + std::to_string(opts.max_nodes));
    if (U.rows() != n || U.cols() != n - 1) throw ParameterError("complement basis has the wrong shape");
    const std::size_t m = n - 1;
    const double g = params.g;
    const double delta = params.delta;

    const Matrix Ut = U.transposed();
    Matrix abar = Ut * L * U;
    abar *= -g;
    for (std::size_t i = 0; i < m; ++i) abar(i, i) += params.a0();
    const Matrix abar_t = abar.transposed();

    std::vector<std::vector<double>> lhat;
    lhat.reserve(links.size());
    for (const UncertainLink& e : links) {
        std::vector<double> v(m);
        for (std::size_t c = 0; c < m; ++c) v[c] = U(e.i, c) - U(e.j, c);
        lhat.push_back(std::move(v));
    }

    RiccatiResult out;
    Matrix P = Matrix::identity(m);
    for (int it = 1; it <= opts.max_iterations; ++it) {
        out.iterations = it;
        Matrix W = Matrix::identity(m, delta) - P;
        const Matrix chol = cholesky(W);
        if (chol.rows() == 0) {
            out.reason = "delta*I - P lost positive definiteness";
            return out;
        }
        Matrix M = P + P * cholesky_solve(chol, P);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) M(i, j) = M(j, i) = 0.5 * (M(i, j) + M(j, i));

        Matrix next = abar_t * M * abar;
        for (std::size_t e = 0; e < links.size(); ++e) {
            const auto& v = lhat[e];
            const std::vector<double> Mv = M * std::span<const double>(v);
            double quad = 0.0;
            for (std::size_t c = 0; c < m; ++c) quad += v[c] * Mv[c];
            const double w = g * g * links[e].sigma2 * quad;
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < m; ++c) next(r, c) += w * v[r] * v[c];
        }
        for (std::size_t i = 0; i < m; ++i) next(i, i) += opts.r + 1.0 / delta;

        double diff = 0.0;
        bool finite = true;
        for (std::size_t k = 0; k < next.data().size(); ++k) {
            const double v = next.data()[k];
            if (!std::isfinite(v)) finite = false;
            diff = std::max(diff, std::abs(v - P.data()[k]));
        }
        if (!finite) {
            out.reason = "non-finite iterate";
            return out;
        }
        P = std::move(next);
        if (diff < opts.tolerance) {
            if (cholesky(Matrix::identity(m, delta) - P).rows() == 0 || cholesky(P).rows() == 0) {
                out.reason = "fixed point outside 0 < P < delta*I";
                return out;
            }
            out.converged = true;
            out.P = std::move(P);
            return out;
        }
    }
    out.reason = "iteration budget exhausted";
    return out;
}

/// Oracle on a Laplacian split with a uniform dispersion: every uncertain edge
/// has sigma2 = cod * mu.
inline RiccatiResult riccati_oracle(const LaplacianSplit& split, const Matrix& U, const DynamicsParams& params,
                                    double cod, RiccatiOptions opts = {}) {
    return riccati_oracle(split.L, uncertain_links(split.L_U, cod), U, params, opts);
}

/// Oracle using each edge's own sigma2.
inline RiccatiResult riccati_oracle(const NetworkGraph& graph, const Matrix& U, const DynamicsParams& params,
                                    RiccatiOptions opts = {}) {
    std::vector<UncertainLink> links;
    for (const Edge& e : graph.edges())
        if (e.uncertain()) links.push_back({e.i, e.j, e.sigma2});
    return riccati_oracle(laplacian_split(graph).L, links, U, params, opts);
}

} // namespace syncmargin
