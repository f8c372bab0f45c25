#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "eigen.hpp"
#include "error.hpp"
#include "experiment_spec.hpp"
#include "graph.hpp"
#include "margin.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sim.hpp"
#include "spectral.hpp"
#include "table.hpp"
#include "version.hpp"

namespace syncmargin {

inline Cell optional_cell(const std::optional<double>& v) {
    if (v) return *v;
    return std::monostate{};
}

/// Open interval of lambda (with lambda2 = lambdaN = lambda) on which the
/// sufficient condition holds, from the roots of alpha0^2(lambda) = lhs.
inline std::optional<std::pair<double, double>> tunnel_interval(const DynamicsParams& params, double cod, double tau) {
    const double g = params.g;
    const double a0 = params.a0();
    const double b = -2.0 * a0 * g + 2.0 * cod * tau * g * g;
    const double c = a0 * a0 - params.lhs();
    const double disc = b * b - 4.0 * g * g * c;
    if (!(disc > 0.0)) return std::nullopt;
    const double root = std::sqrt(disc);
    const double q = -0.5 * (b + std::copysign(root, b));
    double lo = q / (g * g);
    double hi = c / q;
    if (lo > hi) std::swap(lo, hi);
    lo = std::max(lo, 0.0);
    if (!(hi > lo)) return std::nullopt;
    return std::pair{lo, hi};
}

/// Margin surfaces over an abstract eigenvalue axis with lambda2 = lambdaN = lambda.
inline Table sweep_tunnel(const ExperimentSpec& spec) {
    const std::vector<double> as = spec.a_values.empty() ? std::vector<double>{spec.a} : spec.a_values;
    const std::vector<double> deltas = spec.delta_values.empty() ? std::vector<double>{spec.delta} : spec.delta_values;
    const std::vector<double> cods = spec.cod_values.empty() ? std::vector<double>{spec.cod} : spec.cod_values;

    Table t;
    t.columns = {"a", "delta", "g", "cod", "tau", "lambda", "lambda2_star", "lambdaN_star", "alpha0_sq", "rho_SM",
                 "feasible"};
    for (double a : as)
        for (double delta : deltas) {
            const DynamicsParams params{a, delta, spec.g, 0.0};
            params.validate();
            const auto crit = critical_eigenvalues(params);
            std::vector<double> lambdas = spec.lambda_values;
            if (lambdas.empty()) {
                const double top = crit.lambdaN_star > 0.0 ? 2.0 * crit.lambdaN_star : 2.0 / spec.g;
                for (std::size_t j = 1; j <= spec.lambda_count; ++j)
                    lambdas.push_back(top * static_cast<double>(j) / static_cast<double>(spec.lambda_count));
            }
            for (double cod : cods)
                for (double lambda : lambdas) {
                    SpectralSummary s;
                    s.lambda2 = s.lambdaN = lambda;
                    s.tau = spec.tau;
                    const auto r = check_mss(s, params, cod);
                    t.rows.push_back({a, delta, spec.g, cod, spec.tau, lambda, crit.lambda2_star, crit.lambdaN_star,
                                      r.alpha0_sq, optional_cell(r.rho_SM), r.feasible});
                }
        }
    return t;
}

/// Spectral data of one ring lattice with its uncertain-edge designation.
struct NnSpectrum {
    std::size_t k = 0;
    SpectralSummary summary;
    std::optional<double> spectrum_err; ///< max |solver - circulant| / lambdaN
};

/// Nominal eigenvalues come from the circulant formula; lambda2_D and lambdaN_U
/// from dense decompositions of L_D and L_U. With check_spectrum the dense
/// spectrum of L is compared against the formula.
inline NnSpectrum nn_spectrum(const ExperimentSpec& spec, std::size_t k) {
    const auto base = ring_lattice(spec.n_nodes, k);
    const auto graph = designate_uncertain(base, spec.uncertain_fraction, 1.0, mix_seed({spec.seed, k}));
    const auto split = laplacian_split(graph);
    const auto eig_d = symmetric_eigenvalues(split.L_D, spec.eigen_method);
    const auto eig_u = symmetric_eigenvalues(split.L_U, spec.eigen_method);
    NnSpectrum out;
    out.k = k;
    auto nominal = ring_lattice_spectrum(spec.n_nodes, k);
    out.summary = make_summary(nominal, eig_d[1], eig_u.back());
    if (spec.check_spectrum) {
        const auto eig_l = symmetric_eigenvalues(split.L, spec.eigen_method);
        double err = 0.0;
        for (std::size_t i = 0; i < eig_l.size(); ++i) err = std::max(err, std::abs(eig_l[i] - out.summary.eigenvalues[i]));
        out.spectrum_err = err / out.summary.lambdaN;
    }
    return out;
}

/// Margin against neighbour count for ring lattices. The uncertain-edge subset
/// for each k is shared by every (cod, g) pair so curves are comparable.
inline Table sweep_nn(const ExperimentSpec& spec) {
    std::vector<NnSpectrum> spectra(spec.k_values.size());
    parallel_for(spec.k_values.size(), spec.threads, [&](std::size_t i) { spectra[i] = nn_spectrum(spec, spec.k_values[i]); });

    Table t;
    t.columns = {"k", "cod", "g", "lambda2", "lambdaN", "lambda2_D", "lambdaN_U", "tau", "lambda_sup", "alpha0_sq",
                 "rho_SM", "feasible", "spectrum_err"};
    for (double cod : spec.cod_values)
        for (double g : spec.g_values) {
            const DynamicsParams params{spec.a, spec.delta, g, 0.0};
            for (const auto& sp : spectra) {
                const auto& s = sp.summary;
                const auto r = check_mss(s, params, cod);
                t.rows.push_back({static_cast<std::int64_t>(sp.k), cod, g, s.lambda2, s.lambdaN, s.lambda2_D,
                                  s.lambdaN_U, s.tau, r.lambda_sup, r.alpha0_sq, optional_cell(r.rho_SM), r.feasible,
                                  optional_cell(sp.spectrum_err)});
            }
        }
    return t;
}

/// Shape of one margin-vs-k curve; infeasible points count as missing.
struct MarginCurveShape {
    std::optional<std::size_t> first_feasible_k;
    bool infeasible_band = false; ///< the smallest k is infeasible and some later k is feasible
    std::optional<std::size_t> k_star; ///< argmax of the feasible margins
    bool interior_max = false; ///< k_star strictly beats both grid neighbours
    std::optional<std::size_t> decreasing_from_k; ///< margin strictly decreasing from here to the last k
};

inline MarginCurveShape analyze_margin_curve(const std::vector<std::size_t>& ks, const std::vector<std::optional<double>>& rho) {
    MarginCurveShape out;
    const std::size_t n = ks.size();
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        if (!rho[i]) continue;
        if (!out.first_feasible_k) out.first_feasible_k = ks[i];
        if (!best || *rho[i] > *rho[*best]) best = i;
    }
    if (!best) return out;
    out.infeasible_band = !rho[0];
    out.k_star = ks[*best];
    const std::size_t b = *best;
    out.interior_max = b > 0 && b + 1 < n && rho[b - 1] && rho[b + 1] && *rho[b] > *rho[b - 1] && *rho[b] > *rho[b + 1];
    if (rho[n - 1]) {
        std::size_t i = n - 1;
        while (i > 0 && rho[i - 1] && *rho[i - 1] > *rho[i]) --i;
        if (i + 1 < n) out.decreasing_from_k = ks[i];
    }
    return out;
}

/// Splits an nn table into (cod, g) curves and analyses each.
inline std::vector<std::pair<std::pair<double, double>, MarginCurveShape>> nn_curve_shapes(const Table& t) {
    const auto ck = t.column("k"), cc = t.column("cod"), cg = t.column("g"), cr = t.column("rho_SM"),
               cf = t.column("feasible");
    std::map<std::pair<double, double>, std::pair<std::vector<std::size_t>, std::vector<std::optional<double>>>> curves;
    std::vector<std::pair<double, double>> order;
    for (const auto& row : t.rows) {
        const std::pair key{std::get<double>(row[cc]), std::get<double>(row[cg])};
        if (!curves.count(key)) order.push_back(key);
        auto& [ks, rhos] = curves[key];
        ks.push_back(static_cast<std::size_t>(std::get<std::int64_t>(row[ck])));
        const bool feasible = std::get<bool>(row[cf]);
        rhos.push_back(feasible ? std::optional(cell_as_double(row[cr])) : std::nullopt);
    }
    std::vector<std::pair<std::pair<double, double>, MarginCurveShape>> out;
    for (const auto& key : order) out.emplace_back(key, analyze_margin_curve(curves[key].first, curves[key].second));
    return out;
}

namespace detail {

struct Moments {
    std::size_t count = 0;
    double m = 0.0;
    double m2 = 0.0;
    void add(double v) {
        ++count;
        const double d = v - m;
        m += d / static_cast<double>(count);
        m2 += d * (v - m);
    }
    Cell mean() const { return count ? Cell(m) : Cell(std::monostate{}); }
    Cell standard_error() const {
        if (count < 2) return std::monostate{};
        const double c = static_cast<double>(count);
        return std::sqrt(std::max(0.0, m2 / (c - 1.0)) / c);
    }
};

struct RealizationGain {
    bool ok = false;
    double g_star = 0.0;
    std::optional<double> rho;
    double lambda2 = 0.0;
    double lambdaN = 0.0;
};

} // namespace detail

/// Optimal gain of one random realization (topology 0 = ER, 1 = SW).
inline detail::RealizationGain er_sw_realization(const ExperimentSpec& spec, int topology, std::size_t n, double p,
                                                std::uint64_t seed) {
    detail::RealizationGain out;
    try {
        const auto graph = topology == 0 ? erdos_renyi(n, p, seed) : watts_strogatz(n, spec.sw_k, p, seed);
        SpectralSummary s;
        if (spec.tau_override) {
            s = make_summary(symmetric_eigenvalues(laplacian_split(graph).L, spec.eigen_method), 0.0, 0.0);
            s.tau = *spec.tau_override;
        } else {
            const auto designated = designate_uncertain(graph, spec.uncertain_fraction, spec.cod, mix_seed({seed, 0xd5}));
            s = spectral_summary(laplacian_split(designated), spec.eigen_method);
        }
        const auto opt = optimal_gain(s, spec.a, spec.delta, spec.cod);
        out.ok = true;
        out.g_star = opt.g_star;
        out.rho = opt.report.rho_SM;
        out.lambda2 = s.lambda2;
        out.lambdaN = s.lambdaN;
    } catch (const GenerationError&) {
    } catch (const NumericalError&) {
    }
    return out;
}

/// Seed-averaged optimal gains of Erdos-Renyi and Watts-Strogatz graphs.
inline Table sweep_er_sw(const ExperimentSpec& spec) {
    struct Point {
        int topology;
        std::size_t n;
        std::size_t p_index;
        double p;
    };
    std::vector<Point> points;
    for (int topo = 0; topo < 2; ++topo)
        for (std::size_t n : spec.sizes) {
            const auto& ps = topo == 0 ? spec.p_er : spec.p_sw;
            for (std::size_t i = 0; i < ps.size(); ++i) points.push_back({topo, n, i, ps[i]});
        }
    const std::size_t seeds = spec.n_seeds;
    std::vector<detail::RealizationGain> results(points.size() * seeds);
    parallel_for(results.size(), spec.threads, [&](std::size_t idx) {
        const auto& pt = points[idx / seeds];
        const std::uint64_t s = idx % seeds;
        const std::uint64_t seed = mix_seed({spec.seed, static_cast<std::uint64_t>(pt.topology), pt.n, pt.p_index, s});
        results[idx] = er_sw_realization(spec, pt.topology, pt.n, pt.p, seed);
    });

    Table t;
    t.columns = {"topology", "n", "p", "realizations", "failures", "g_star_mean", "g_star_se", "rho_mean", "rho_se",
                 "lambda2_mean", "lambdaN_mean"};
    for (std::size_t i = 0; i < points.size(); ++i) {
        detail::Moments gm, rm, l2, ln;
        std::int64_t failures = 0;
        for (std::size_t s = 0; s < seeds; ++s) {
            const auto& r = results[i * seeds + s];
            if (!r.ok) {
                ++failures;
                continue;
            }
            gm.add(r.g_star);
            if (r.rho) rm.add(*r.rho);
            l2.add(r.lambda2);
            ln.add(r.lambdaN);
        }
        t.rows.push_back({std::string(points[i].topology == 0 ? "er" : "sw"), static_cast<std::int64_t>(points[i].n),
                          points[i].p, static_cast<std::int64_t>(gm.count), failures, gm.mean(), gm.standard_error(),
                          rm.mean(), rm.standard_error(), l2.mean(), ln.mean()});
    }
    return t;
}

/// First p at which the seed-averaged ER and SW optimal-gain curves for size n
/// cross, linearly interpolated between common grid points.
inline std::optional<double> gain_crossover(const Table& t, std::size_t n) {
    const auto ct = t.column("topology"), cn = t.column("n"), cp = t.column("p"), cg = t.column("g_star_mean");
    std::map<double, double> er, sw;
    for (const auto& row : t.rows) {
        if (std::get<std::int64_t>(row[cn]) != static_cast<std::int64_t>(n)) continue;
        if (std::holds_alternative<std::monostate>(row[cg])) continue;
        auto& curve = std::get<std::string>(row[ct]) == "er" ? er : sw;
        curve[std::round(std::get<double>(row[cp]) * 1e9) / 1e9] = std::get<double>(row[cg]);
    }
    std::vector<std::pair<double, double>> diff;
    for (const auto& [p, g] : er)
        if (auto it = sw.find(p); it != sw.end()) diff.emplace_back(p, g - it->second);
    for (std::size_t i = 0; i < diff.size(); ++i) {
        if (diff[i].second == 0.0) return diff[i].first;
        if (i + 1 < diff.size() && (diff[i].second > 0.0) != (diff[i + 1].second > 0.0) && diff[i + 1].second != 0.0) {
            const auto [p0, d0] = diff[i];
            const auto [p1, d1] = diff[i + 1];
            return p0 + (p1 - p0) * d0 / (d0 - d1);
        }
    }
    return std::nullopt;
}

struct CaseOutcome {
    ValidationCase resolved; ///< g and cod as actually simulated
    NetworkGraph graph;
    SpectralSummary summary;
    MarginReport report;
    EnsembleResult ensemble;
    std::string verdict; ///< pass | fail | descriptive
};

struct ValidationReport {
    Table table;
    std::vector<CaseOutcome> cases;
    bool all_pass = true;
};

inline NetworkGraph validation_graph(const ValidationCase& c, double cod, std::uint64_t seed) {
    NetworkGraph base = c.topology == "ring" ? ring_lattice(c.n, c.k)
                        : c.topology == "er" ? erdos_renyi(c.n, c.p, seed)
                                             : watts_strogatz(c.n, c.k, c.p, seed);
    return designate_uncertain(base, c.uncertain_fraction, cod, mix_seed({seed, 0xca5e}));
}

/// Largest cod keeping the sufficient condition at fixed gain, by bisection on
/// check_mss. Returns nullopt when even cod = 0 is infeasible.
inline std::optional<double> cod_boundary(const SpectralSummary& s, const DynamicsParams& params) {
    if (!check_mss(s, params, 0.0).feasible) return std::nullopt;
    if (s.tau == 0.0) return std::numeric_limits<double>::infinity();
    double lo = 0.0;
    double hi = 1.0;
    while (check_mss(s, params, hi).feasible) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) return std::numeric_limits<double>::infinity();
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (check_mss(s, params, mid).feasible ? lo : hi) = mid;
    }
    return lo;
}

inline CaseOutcome run_validation_case(const ExperimentSpec& spec, const ValidationCase& c, std::size_t index) {
    const std::uint64_t seed = mix_seed({spec.seed, index});
    CaseOutcome out;
    out.resolved = c;
    out.graph = validation_graph(c, c.cod, seed);
    out.summary = spectral_summary(laplacian_split(out.graph));
    const double g = c.g ? *c.g : optimal_gain(out.summary, c.a, c.delta, c.cod).g_star;
    out.resolved.g = g;
    DynamicsParams params{c.a, c.delta, g, c.omega2};
    if (c.boundary_search) {
        const auto edge = cod_boundary(out.summary, params);
        if (edge && std::isfinite(*edge)) {
            out.resolved.cod = *edge;
            out.graph = validation_graph(c, *edge, seed);
        }
    }
    out.report = check_mss(out.summary, params, out.resolved.cod);

    SimConfig cfg{out.graph, params, Nonlinearity{spec.nonlinearity, c.delta}};
    cfg.horizon = spec.horizon;
    cfg.n_runs = spec.runs;
    cfg.rng_seed = mix_seed({seed, 0x51});
    cfg.xi_distribution = spec.xi;
    cfg.threads = spec.threads;
    out.ensemble = run_ensemble(cfg);

    if (!out.report.feasible) {
        out.verdict = "descriptive";
        return out;
    }
    const auto& e = out.ensemble;
    bool ok = e.diverged_runs == 0 && !e.mse_mean.empty() && e.fitted_beta && *e.fitted_beta < 1.0;
    if (ok && c.omega2 == 0.0) {
        const double best = *std::min_element(e.mse_mean.begin(), e.mse_mean.end());
        ok = best < 1e-10 * e.mse_mean.front();
    }
    out.verdict = ok ? "pass" : "fail";
    return out;
}

/// Runs every case; feasible cases must show decay, infeasible ones are recorded only.
inline ValidationReport validate_mc(const ExperimentSpec& spec) {
    ValidationReport rep;
    rep.table.columns = {"label", "topology", "n", "edges", "uncertain_edges", "a", "delta", "g", "cod", "omega2",
                         "tau", "lambda2", "lambdaN", "alpha0_sq", "rho_SM", "feasible", "e0", "e_final",
                         "min_ratio", "fitted_beta", "fitted_floor", "fit_points", "diverged_runs", "verdict"};
    for (std::size_t i = 0; i < spec.cases.size(); ++i) {
        auto o = run_validation_case(spec, spec.cases[i], i);
        const auto& e = o.ensemble;
        Cell e0 = std::monostate{}, efinal = std::monostate{}, ratio = std::monostate{};
        if (!e.mse_mean.empty()) {
            e0 = e.mse_mean.front();
            efinal = e.mse_mean.back();
            ratio = *std::min_element(e.mse_mean.begin(), e.mse_mean.end()) / e.mse_mean.front();
        }
        const auto& c = o.resolved;
        rep.table.rows.push_back({c.label, c.topology, static_cast<std::int64_t>(c.n),
                                  static_cast<std::int64_t>(o.graph.n_edges()),
                                  static_cast<std::int64_t>(o.graph.n_uncertain()), c.a, c.delta, *c.g, c.cod,
                                  c.omega2, o.summary.tau, o.summary.lambda2, o.summary.lambdaN, o.report.alpha0_sq,
                                  optional_cell(o.report.rho_SM), o.report.feasible, e0, efinal, ratio,
                                  optional_cell(e.fitted_beta), e.fitted_floor, static_cast<std::int64_t>(e.fit_points),
                                  static_cast<std::int64_t>(e.diverged_runs), o.verdict});
        if (o.verdict == "fail") rep.all_pass = false;
        rep.cases.push_back(std::move(o));
    }
    return rep;
}

inline Table trajectory_table(const EnsembleResult& e) {
    Table t;
    t.columns = {"t", "mse_mean", "mse_p95"};
    for (std::size_t i = 0; i < e.mse_mean.size(); ++i)
        t.rows.push_back({static_cast<std::int64_t>(i), e.mse_mean[i], e.mse_p95[i]});
    return t;
}

inline std::vector<std::string> provenance(const ExperimentSpec& spec) {
    return {std::string("syncmargin ") + kVersion, "experiment " + to_string(spec.name),
            "spec " + spec_to_json(spec).dump()};
}

struct ExperimentOutput {
    Table table;
    std::vector<std::string> files;
    nlohmann::json summary;
    bool ok = true; ///< false when a validation case failed
};

/// Runs the named experiment without touching the filesystem.
inline ExperimentOutput compute_experiment(const ExperimentSpec& spec) {
    validate_spec(spec);
    ExperimentOutput out;
    out.summary["experiment"] = to_string(spec.name);
    switch (spec.name) {
    case ExperimentName::tunnel_a:
    case ExperimentName::tunnel_delta:
    case ExperimentName::tunnel_slice:
        out.table = sweep_tunnel(spec);
        break;
    case ExperimentName::nn_margin_vs_k:
    case ExperimentName::nn_margin_vs_k_by_cod:
    case ExperimentName::nn_margin_vs_k_by_gain: {
        out.table = sweep_nn(spec);
        auto& curves = out.summary["curves"] = nlohmann::json::array();
        for (const auto& [key, shape] : nn_curve_shapes(out.table)) {
            nlohmann::json c{{"cod", key.first}, {"g", key.second}, {"infeasible_band", shape.infeasible_band},
                             {"interior_max", shape.interior_max}};
            c["first_feasible_k"] = shape.first_feasible_k ? nlohmann::json(*shape.first_feasible_k) : nlohmann::json(nullptr);
            c["k_star"] = shape.k_star ? nlohmann::json(*shape.k_star) : nlohmann::json(nullptr);
            c["decreasing_from_k"] = shape.decreasing_from_k ? nlohmann::json(*shape.decreasing_from_k) : nlohmann::json(nullptr);
            curves.push_back(c);
        }
        break;
    }
    case ExperimentName::er_sw_optimal_gain: {
        out.table = sweep_er_sw(spec);
        auto& cross = out.summary["crossover_p"] = nlohmann::json::object();
        for (std::size_t n : spec.sizes) {
            const auto p = gain_crossover(out.table, n);
            cross[std::to_string(n)] = p ? nlohmann::json(*p) : nlohmann::json(nullptr);
        }
        break;
    }
    case ExperimentName::validate_mc: {
        auto rep = validate_mc(spec);
        out.table = std::move(rep.table);
        out.ok = rep.all_pass;
        auto& verdicts = out.summary["verdicts"] = nlohmann::json::object();
        for (const auto& c : rep.cases) verdicts[c.resolved.label] = c.verdict;
        out.summary["all_pass"] = rep.all_pass;
        if (spec.trajectories)
            for (const auto& c : rep.cases) {
                const auto path = (std::filesystem::path(spec.out_dir) /
                                   (to_string(spec.name) + "_" + c.resolved.label + "_trajectory.csv"))
                                      .string();
                std::filesystem::create_directories(spec.out_dir);
                write_csv_file(path, trajectory_table(c.ensemble), provenance(spec));
                out.files.push_back(path);
            }
        break;
    }
    }
    out.summary["rows"] = out.table.rows.size();
    return out;
}

/// Runs the experiment and writes <name>.csv plus <name>_manifest.txt into out_dir.
inline ExperimentOutput run_experiment(const ExperimentSpec& spec) {
    auto out = compute_experiment(spec);
    std::filesystem::create_directories(spec.out_dir);
    const auto dir = std::filesystem::path(spec.out_dir);
    const auto csv = (dir / (to_string(spec.name) + ".csv")).string();
    write_csv_file(csv, out.table, provenance(spec));
    out.files.insert(out.files.begin(), csv);

    const auto manifest = (dir / (to_string(spec.name) + "_manifest.txt")).string();
    std::ofstream m(manifest, std::ios::binary);
    if (!m) throw FormatError("cannot open '" + manifest + "' for writing");
    m << "syncmargin " << kVersion << '\n';
    m << "experiment " << to_string(spec.name) << '\n';
    m << "rows " << out.table.rows.size() << '\n';
    for (const auto& f : out.files) m << "file " << f << '\n';
    m << "summary " << out.summary.dump() << '\n';
    m << "spec\n" << spec_to_json(spec).dump(2) << '\n';
    out.files.push_back(manifest);
    out.summary["files"] = out.files;
    return out;
}

} // namespace syncmargin
