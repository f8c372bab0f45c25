#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "matrix.hpp"

namespace syncmargin {

enum class EigenMethod {
    jacobi,         ///< cyclic Jacobi rotations; values and vectors
    tridiagonal_ql, ///< Householder tridiagonalization + implicit QR (Eigen); values only, much faster
};

struct EigenDecomposition {
    std::vector<double> values; ///< ascending
    Matrix vectors;             ///< column k is the eigenvector for values[k]; empty if not requested
    int sweeps = 0;
};

struct JacobiOptions {
    double tolerance = 1e-12; ///< stop when off-diagonal Frobenius norm <= tolerance * ||M||_F
    int max_sweeps = 100;
    bool compute_vectors = true;
};

namespace detail {

inline void require_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) throw ContractViolation("symmetric eigensolver: matrix is not square");
    const double scale = max_abs(m);
    if (asymmetry(m) > 1e-10 * std::max(scale, std::numeric_limits<double>::min()))
        throw ContractViolation("symmetric eigensolver: matrix is not symmetric");
}

inline double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (j != i) s += r[j] * r[j];
    }
    return std::sqrt(s);
}

struct Rotation {
    std::size_t q;
    double c;
    double s;
};

// Applies the pending rotations to the p and q entries of a row.
inline void replay(std::span<double> row, std::size_t p, const std::vector<Rotation>& rots, std::size_t from) {
    double x = row[p];
    for (std::size_t r = from; r < rots.size(); ++r) {
        const Rotation& rot = rots[r];
        const double y = row[rot.q];
        row[rot.q] = rot.s * x + rot.c * y;
        x = rot.c * x - rot.s * y;
    }
    row[p] = x;
}

// Same as replay, four rows interleaved.
inline void replay4(std::span<double> r0, std::span<double> r1, std::span<double> r2, std::span<double> r3,
                    std::size_t p, const std::vector<Rotation>& rots, std::size_t f0, std::size_t f1,
                    std::size_t f2, std::size_t f3) {
    const std::size_t start = std::max(std::max(f0, f1), std::max(f2, f3));
    const std::size_t end = rots.size();
    // bring each row to the common start
    auto partial = [&](std::span<double> row, std::size_t from) {
        double x = row[p];
        for (std::size_t r = from; r < start; ++r) {
            const double y = row[rots[r].q];
            row[rots[r].q] = rots[r].s * x + rots[r].c * y;
            x = rots[r].c * x - rots[r].s * y;
        }
        row[p] = x;
    };
    partial(r0, f0);
    partial(r1, f1);
    partial(r2, f2);
    partial(r3, f3);
    double x0 = r0[p], x1 = r1[p], x2 = r2[p], x3 = r3[p];
    for (std::size_t r = start; r < end; ++r) {
        const std::size_t q = rots[r].q;
        const double c = rots[r].c;
        const double s = rots[r].s;
        const double y0 = r0[q], y1 = r1[q], y2 = r2[q], y3 = r3[q];
        r0[q] = s * x0 + c * y0;
        r1[q] = s * x1 + c * y1;
        r2[q] = s * x2 + c * y2;
        r3[q] = s * x3 + c * y3;
        x0 = c * x0 - s * y0;
        x1 = c * x1 - s * y1;
        x2 = c * x2 - s * y2;
        x3 = c * x3 - s * y3;
    }
    r0[p] = x0;
    r1[p] = x1;
    r2[p] = x2;
    r3[p] = x3;
}

} // namespace detail

/// Cyclic Jacobi eigensolver for a symmetric matrix (row-cyclic ordering).
/// The input is copied. For each pivot row p the rotations (p, q) are applied
/// to rows p and q immediately; their effect on the mirrored columns is
/// replayed row by row, lazily, before a row is next read.
///
/// Throws ContractViolation for asymmetric input and NumericalError if the
/// sweep budget runs out.
inline EigenDecomposition symmetric_eigen(const Matrix& m, JacobiOptions opts = {}) {
    detail::require_symmetric(m);
    const std::size_t n = m.rows();
    Matrix a = m;
    // rows of vt are eigenvectors, so rotations stay row-contiguous
    Matrix vt = opts.compute_vectors ? Matrix::identity(n) : Matrix();

    const double target = opts.tolerance * frobenius_norm(m);
    std::vector<detail::Rotation> rotations;
    rotations.reserve(n);
    std::vector<std::size_t> replayed(n, 0);
    int sweep = 0;
    for (;; ++sweep) {
        const double off = detail::off_diagonal_norm(a);
        if (off <= target || n < 2) break;
        if (sweep >= opts.max_sweeps)
            throw NumericalError("Jacobi eigensolver did not converge in " + std::to_string(opts.max_sweeps) +
                                 " sweeps");
        // early sweeps only rotate the larger entries
        const double threshold = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            auto rp = a.row(p);
            rotations.clear();
            std::fill(replayed.begin(), replayed.end(), std::size_t{0});
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = rp[q];
                const double app = rp[p];
                const double aqq = a(q, q);
                if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    rp[q] = 0.0;
                    continue;
                }
                if (std::abs(apq) <= threshold || apq == 0.0) continue;

                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                auto rq = a.row(q);
                detail::replay(rq, p, rotations, 0);
                rq[p] = apq;
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = rp[k];
                    const double y = rq[k];
                    rp[k] = c * x - s * y;
                    rq[k] = s * x + c * y;
                }
                rp[p] = app - t * apq;
                rq[q] = aqq + t * apq;
                rp[q] = 0.0;
                rq[p] = 0.0;
                rotations.push_back({q, c, s});
                replayed[q] = rotations.size();

                if (opts.compute_vectors) {
                    auto vp = vt.row(p);
                    auto vq = vt.row(q);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double x = vp[k];
                        const double y = vq[k];
                        vp[k] = c * x - s * y;
                        vq[k] = s * x + c * y;
                    }
                }
            }
            // bring every other row up to date with this pivot's rotations,
            // then mirror row p into column p
            if (!rotations.empty()) {
                std::size_t batch[4];
                std::size_t filled = 0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p) continue;
                    batch[filled++] = k;
                    if (filled == 4) {
                        detail::replay4(a.row(batch[0]), a.row(batch[1]), a.row(batch[2]), a.row(batch[3]), p,
                                        rotations, replayed[batch[0]], replayed[batch[1]], replayed[batch[2]],
                                        replayed[batch[3]]);
                        filled = 0;
                    }
                }
                for (std::size_t b = 0; b < filled; ++b) detail::replay(a.row(batch[b]), p, rotations, replayed[batch[b]]);
            }
            for (std::size_t k = 0; k < n; ++k)
                if (k != p) a(k, p) = rp[k];
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    EigenDecomposition out;
    out.sweeps = sweep;
    out.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.values[k] = a(order[k], order[k]);
    if (opts.compute_vectors) {
        out.vectors = Matrix(n, n);
        for (std::size_t k = 0; k < n; ++k) {
            auto v = vt.row(order[k]);
            for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v[r];
        }
    }
    return out;
}

/// Eigenvalues only, via Eigen's self-adjoint solver (Householder
/// tridiagonalization + implicit symmetric QR). Ascending order.
inline std::vector<double> tridiagonal_ql_eigenvalues(const Matrix& m) {
    detail::require_symmetric(m);
    const auto n = static_cast<Eigen::Index>(m.rows());
    if (n == 0) return {};
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(m.data().data(), n, n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("tridiagonal QL did not converge");
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + n};
}

/// Eigenvalues (ascending) with the chosen method.
inline std::vector<double> symmetric_eigenvalues(const Matrix& m, EigenMethod method = EigenMethod::jacobi) {
    if (method == EigenMethod::tridiagonal_ql) return tridiagonal_ql_eigenvalues(m);
    JacobiOptions opts;
    opts.compute_vectors = false;
    return symmetric_eigen(m, opts).values;
}

/// Closed-form Laplacian spectrum of ring_lattice(n, k) (a circulant matrix),
/// sorted ascending: 2k - 2 * sum_{m=1..k} cos(2*pi*m*j/n), j = 0..n-1.
inline std::vector<double> ring_lattice_spectrum(std::size_t n, std::size_t k) {
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t m = 1; m <= k; ++m)
            s += std::cos(2.0 * std::numbers::pi * static_cast<double>((m * j) % n) / static_cast<double>(n));
        out[j] = 2.0 * static_cast<double>(k) - 2.0 * s;
    }
    out[0] = 0.0;
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string to_string(EigenMethod m) { return m == EigenMethod::jacobi ? "jacobi" : "tridiagonal_ql"; }

inline EigenMethod eigen_method_from_string(const std::string& s) {
    if (s == "jacobi") return EigenMethod::jacobi;
    if (s == "tridiagonal_ql" || s == "ql") return EigenMethod::tridiagonal_ql;
    throw ParameterError("unknown eigen method '" + s + "'");
}

} // namespace syncmargin
