#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "eigen.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "matrix.hpp"

namespace syncmargin {

/// Spectral quantities entering the margin formulas.
struct SpectralSummary {
    std::vector<double> eigenvalues; ///< spectrum of L, ascending (may be empty for abstract-lambda sweeps)
    double lambda2 = 0.0;
    double lambdaN = 0.0;
    double lambda2_D = 0.0; ///< algebraic connectivity of the deterministic subgraph
    double lambdaN_U = 0.0; ///< largest eigenvalue of the mean uncertain Laplacian
    double tau = 0.0;
};

/// tau = lambdaN_U / (lambdaN_U + lambda2_D); 0 when there are no uncertain edges.
inline double location_factor(double lambda2_D, double lambdaN_U) {
    if (!(lambdaN_U > 0.0)) return 0.0;
    return lambdaN_U / (lambdaN_U + lambda2_D);
}

/// Assembles a summary from an already computed nominal spectrum plus the two
/// split-Laplacian extremes. Values below 1e-10 * lambdaN are treated as zero.
inline SpectralSummary make_summary(std::vector<double> eigenvalues, double lambda2_D, double lambdaN_U) {
    if (eigenvalues.size() < 2) throw ParameterError("spectral summary needs at least two nodes");
    std::sort(eigenvalues.begin(), eigenvalues.end());
    SpectralSummary s;
    s.lambdaN = eigenvalues.back();
    const double zero = 1e-10 * std::abs(s.lambdaN);
    s.lambda2 = eigenvalues[1];
    if (!(s.lambda2 > zero)) throw NumericalError("graph effectively disconnected (lambda2 <= 1e-10 * lambdaN)");
    s.lambda2_D = lambda2_D <= zero ? 0.0 : lambda2_D;
    s.lambdaN_U = lambdaN_U <= zero ? 0.0 : lambdaN_U;
    s.tau = location_factor(s.lambda2_D, s.lambdaN_U);
    s.eigenvalues = std::move(eigenvalues);
    return s;
}

/// Full decompositions of L, L_D and L_U.
inline SpectralSummary spectral_summary(const LaplacianSplit& split, EigenMethod method = EigenMethod::jacobi) {
    auto eig_l = symmetric_eigenvalues(split.L, method);
    const auto eig_d = symmetric_eigenvalues(split.L_D, method);
    const auto eig_u = symmetric_eigenvalues(split.L_U, method);
    return make_summary(std::move(eig_l), eig_d.size() > 1 ? eig_d[1] : 0.0, eig_u.empty() ? 0.0 : eig_u.back());
}

/// Helmert basis of the orthogonal complement of the all-ones vector:
/// column m (1-based) holds 1/sqrt(m(m+1)) on the first m coordinates and
/// -m/sqrt(m(m+1)) on coordinate m+1.
inline Matrix orthonormal_complement(std::size_t n) {
    if (n < 2) throw ParameterError("orthonormal complement needs n >= 2");
    Matrix u(n, n - 1);
    for (std::size_t col = 0; col + 1 < n; ++col) {
        const double m = static_cast<double>(col + 1);
        const double norm = std::sqrt(m * (m + 1.0));
        for (std::size_t r = 0; r <= col; ++r) u(r, col) = 1.0 / norm;
        u(col + 1, col) = -m / norm;
    }
    return u;
}

} // namespace syncmargin
