#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace syncmargin {

using NodeIndex = std::size_t;

/// Undirected edge with nominal weight `mu` and perturbation variance `sigma2`.
/// An edge is uncertain iff sigma2 > 0.
struct Edge {
    NodeIndex i = 0;
    NodeIndex j = 0;
    double mu = 1.0;
    double sigma2 = 0.0;

    bool uncertain() const noexcept { return sigma2 > 0.0; }
    double cod() const noexcept { return sigma2 / mu; }

    friend bool operator==(const Edge&, const Edge&) = default;
};

class NetworkGraph {
public:
    NetworkGraph() = default;

    /// Edges are stored in canonical (i < j) form, sorted. Throws ParameterError
    /// on self-loops, out-of-range endpoints, duplicates, mu <= 0 or sigma2 < 0.
    NetworkGraph(std::size_t n_nodes, std::vector<Edge> edges) : n_(n_nodes), edges_(std::move(edges)) {
        for (Edge& e : edges_) {
            if (e.i == e.j) throw ParameterError("self-loop at node " + std::to_string(e.i));
            if (e.i >= n_ || e.j >= n_) throw ParameterError("edge endpoint out of range");
            if (!(e.mu > 0.0) || !std::isfinite(e.mu)) throw ParameterError("edge weight mu must be positive");
            if (!(e.sigma2 >= 0.0) || !std::isfinite(e.sigma2))
                throw ParameterError("edge variance sigma2 must be non-negative");
            if (e.i > e.j) std::swap(e.i, e.j);
        }
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
        for (std::size_t k = 1; k < edges_.size(); ++k)
            if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j)
                throw ParameterError("duplicate edge (" + std::to_string(edges_[k].i) + "," +
                                     std::to_string(edges_[k].j) + ")");
    }

    std::size_t n_nodes() const noexcept { return n_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t n_edges() const noexcept { return edges_.size(); }

    std::size_t n_uncertain() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(edges_.begin(), edges_.end(), [](const Edge& e) { return e.uncertain(); }));
    }

    /// Maximum coefficient of dispersion over uncertain edges (0 if none).
    double max_cod() const noexcept {
        double c = 0.0;
        for (const Edge& e : edges_)
            if (e.uncertain()) c = std::max(c, e.cod());
        return c;
    }

    std::vector<std::size_t> degrees() const {
        std::vector<std::size_t> d(n_, 0);
        for (const Edge& e : edges_) {
            ++d[e.i];
            ++d[e.j];
        }
        return d;
    }

    std::vector<std::vector<NodeIndex>> adjacency() const {
        std::vector<std::vector<NodeIndex>> adj(n_);
        for (const Edge& e : edges_) {
            adj[e.i].push_back(e.j);
            adj[e.j].push_back(e.i);
        }
        return adj;
    }

    bool is_connected() const {
        if (n_ <= 1) return true;
        const auto adj = adjacency();
        std::vector<char> seen(n_, 0);
        std::queue<NodeIndex> q;
        q.push(0);
        seen[0] = 1;
        std::size_t count = 1;
        while (!q.empty()) {
            const NodeIndex u = q.front();
            q.pop();
            for (NodeIndex v : adj[u])
                if (!seen[v]) {
                    seen[v] = 1;
                    ++count;
                    q.push(v);
                }
        }
        return count == n_;
    }

    friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
};

/// Nominal Laplacian L and its split into deterministic (L_D) and mean
/// uncertain (L_U) parts. L is formed as L_D + L_U.
struct LaplacianSplit {
    Matrix L;
    Matrix L_D;
    Matrix L_U;
};

struct GenerationOptions {
    int max_attempts = 100;
};

namespace detail {

inline void add_edge_to_laplacian(Matrix& m, const Edge& e, double w) {
    m(e.i, e.i) += w;
    m(e.j, e.j) += w;
    m(e.i, e.j) -= w;
    m(e.j, e.i) -= w;
}

inline void check_ring_params(std::size_t n, std::size_t k) {
    if (n < 3) throw ParameterError("ring lattice needs n >= 3");
    if (k < 1 || k > (n - 1) / 2) throw ParameterError("ring lattice needs 1 <= k <= (n-1)/2");
}

inline void check_probability(double p, bool allow_zero) {
    if (!(p >= 0.0 && p <= 1.0) || (!allow_zero && p == 0.0))
        throw ParameterError("probability out of range: " + std::to_string(p));
}

} // namespace detail

/// Each node linked to its k nearest neighbours on either side of a ring.
inline NetworkGraph ring_lattice(std::size_t n, std::size_t k) {
    detail::check_ring_params(n, k);
    std::vector<Edge> edges;
    edges.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 1; m <= k; ++m) edges.push_back({i, (i + m) % n, 1.0, 0.0});
    return NetworkGraph(n, std::move(edges));
}

/// G(n, p) with unit weights. Disconnected samples are redrawn from a fresh
/// stream; after `opts.max_attempts` failures a GenerationError is thrown.
inline NetworkGraph erdos_renyi(std::size_t n, double p, std::uint64_t seed, GenerationOptions opts = {}) {
    detail::check_probability(p, false);
    if (n < 2) throw ParameterError("Erdos-Renyi graph needs n >= 2");
    for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
        std::bernoulli_distribution coin(p);
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (coin(rng)) edges.push_back({i, j, 1.0, 0.0});
        NetworkGraph g(n, std::move(edges));
        if (g.is_connected()) return g;
    }
    throw GenerationError("Erdos-Renyi: no connected sample within " + std::to_string(opts.max_attempts) +
                          " attempts (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
}

/// Watts-Strogatz rewiring of ring_lattice(n, k): for each lattice edge (i, i+m)
/// the far endpoint is moved, with probability p, to a uniformly chosen node that
/// is neither i nor already adjacent to i. Edge count is preserved.
inline NetworkGraph watts_strogatz(std::size_t n, std::size_t k, double p, std::uint64_t seed,
                                   GenerationOptions opts = {}) {
    detail::check_ring_params(n, k);
    detail::check_probability(p, true);
    if (p == 0.0) return ring_lattice(n, k);
    for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
        Rng rng = make_rng(seed, static_cast<std::uint64_t>(attempt));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::set<NodeIndex>> adj(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t m = 1; m <= k; ++m) {
                adj[i].insert((i + m) % n);
                adj[(i + m) % n].insert(i);
            }
        for (std::size_t m = 1; m <= k; ++m) {
            for (std::size_t i = 0; i < n; ++i) {
                const NodeIndex j = (i + m) % n;
                if (unit(rng) >= p) continue;
                if (!adj[i].contains(j)) continue; // already rewired away
                if (adj[i].size() >= n - 1) continue;
                NodeIndex w = pick(rng);
                while (w == i || adj[i].contains(w)) w = pick(rng);
                adj[i].erase(j);
                adj[j].erase(i);
                adj[i].insert(w);
                adj[w].insert(i);
            }
        }
        std::vector<Edge> edges;
        edges.reserve(n * k);
        for (std::size_t i = 0; i < n; ++i)
            for (NodeIndex j : adj[i])
                if (i < j) edges.push_back({i, j, 1.0, 0.0});
        NetworkGraph g(n, std::move(edges));
        if (g.is_connected()) return g;
    }
    throw GenerationError("Watts-Strogatz: no connected sample within " + std::to_string(opts.max_attempts) +
                          " attempts");
}

/// Marks ceil(fraction * |E|) uniformly chosen edges as uncertain with
/// sigma2 = cod * mu; all other edges become deterministic.
inline NetworkGraph designate_uncertain(const NetworkGraph& g, double fraction, double cod, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ParameterError("fraction must lie in [0, 1]");
    if (!(cod >= 0.0) || !std::isfinite(cod)) throw ParameterError("cod must be non-negative");
    std::vector<Edge> edges = g.edges();
    const std::size_t m = edges.size();
    const auto count = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9)));

    std::vector<std::size_t> idx(m);
    for (std::size_t k = 0; k < m; ++k) idx[k] = k;
    Rng rng = make_rng(seed, 0xde51ULL);
    for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, m - 1);
        std::swap(idx[k], idx[pick(rng)]);
    }
    for (Edge& e : edges) e.sigma2 = 0.0;
    for (std::size_t k = 0; k < count; ++k) edges[idx[k]].sigma2 = cod * edges[idx[k]].mu;
    return NetworkGraph(g.n_nodes(), std::move(edges));
}

inline LaplacianSplit laplacian_split(const NetworkGraph& g) {
    const std::size_t n = g.n_nodes();
    LaplacianSplit s{Matrix(n, n), Matrix(n, n), Matrix(n, n)};
    for (const Edge& e : g.edges()) detail::add_edge_to_laplacian(e.uncertain() ? s.L_U : s.L_D, e, e.mu);
    s.L = s.L_D + s.L_U;
    return s;
}

/// Complement of a unit-weight graph; the result is unit-weight and deterministic.
inline NetworkGraph complement(const NetworkGraph& g) {
    for (const Edge& e : g.edges())
        if (e.mu != 1.0) throw UnsupportedOperation("complement requires unit edge weights");
    const std::size_t n = g.n_nodes();
    std::vector<char> present(n * n, 0);
    for (const Edge& e : g.edges()) present[e.i * n + e.j] = 1;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (!present[i * n + j]) edges.push_back({i, j, 1.0, 0.0});
    return NetworkGraph(n, std::move(edges));
}

// Text format: "nodes N" followed by one "i j mu sigma2" line per edge.

inline void write_graph(std::ostream& os, const NetworkGraph& g) {
    os << "nodes " << g.n_nodes() << '\n';
    os << std::setprecision(17);
    for (const Edge& e : g.edges()) os << e.i << ' ' << e.j << ' ' << e.mu << ' ' << e.sigma2 << '\n';
}

inline NetworkGraph read_graph(std::istream& is) {
    std::string line;
    std::size_t n = 0;
    bool have_header = false;
    std::vector<Edge> edges;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        if (!have_header) {
            std::string tag;
            if (!(ls >> tag >> n) || tag != "nodes")
                throw FormatError("graph file: expected 'nodes N' header on line " + std::to_string(lineno));
            have_header = true;
            continue;
        }
        long long i = 0;
        long long j = 0;
        Edge e;
        if (!(ls >> i >> j >> e.mu >> e.sigma2) || i < 0 || j < 0)
            throw FormatError("graph file: malformed edge on line " + std::to_string(lineno));
        std::string extra;
        if (ls >> extra) throw FormatError("graph file: trailing data on line " + std::to_string(lineno));
        e.i = static_cast<NodeIndex>(i);
        e.j = static_cast<NodeIndex>(j);
        edges.push_back(e);
    }
    if (!have_header) throw FormatError("graph file: missing 'nodes N' header");
    return NetworkGraph(n, std::move(edges));
}

} // namespace syncmargin
