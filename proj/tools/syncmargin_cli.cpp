#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <syncmargin/syncmargin.hpp>

using namespace syncmargin;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 3;

// Where a command gets its graph: a file, or a generator plus uncertain-edge designation.
struct GraphSource {
    std::string file;
    std::string topology = "ring";
    std::size_t n = 100;
    std::size_t k = 15;
    double p = 0.1;
    double fraction = 0.7;
    double cod = 1.0;
    std::uint64_t seed = 1;

    void attach(CLI::App* app) {
        app->add_option("--graph", file, "Graph file ('nodes N' header, then 'i j mu sigma2' lines)");
        app->add_option("--topology", topology, "ring | er | sw")->check(CLI::IsMember({"ring", "er", "sw"}));
        app->add_option("--n", n, "Number of nodes");
        app->add_option("--k", k, "Neighbours per side (ring, sw)");
        app->add_option("--p", p, "Edge probability (er) or rewiring probability (sw)");
        app->add_option("--fraction", fraction, "Fraction of edges made uncertain");
        app->add_option("--graph-cod", cod, "CoD assigned to uncertain edges");
        app->add_option("--graph-seed", seed, "Generator seed");
    }

    NetworkGraph build() const {
        if (!file.empty()) {
            std::ifstream in(file);
            if (!in) throw FormatError("cannot open graph file '" + file + "'");
            return read_graph(in);
        }
        NetworkGraph base = topology == "ring" ? ring_lattice(n, k)
                            : topology == "er" ? erdos_renyi(n, p, seed)
                                               : watts_strogatz(n, k, p, seed);
        return designate_uncertain(base, fraction, cod, mix_seed({seed, 0xca5e}));
    }
};

json summary_json(const SpectralSummary& s) {
    return {{"lambda2", s.lambda2}, {"lambdaN", s.lambdaN}, {"lambda2_D", s.lambda2_D},
            {"lambdaN_U", s.lambdaN_U}, {"tau", s.tau}};
}

json report_json(const MarginReport& r) {
    json j{{"a0", r.a0}, {"lambda_sup", r.lambda_sup}, {"alpha0_sq", r.alpha0_sq}, {"lhs", r.lhs},
           {"feasible", r.feasible}, {"hat_a", r.hat_a}, {"sigma_eff_sq", r.sigma_eff_sq}};
    j["rho_SM"] = r.rho_SM ? json(*r.rho_SM) : json(nullptr);
    return j;
}

double resolve_cod(const std::optional<double>& cod, const NetworkGraph& g) { return cod ? *cod : g.max_cod(); }

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-square synchronization margins for networks with stochastic links"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    GraphSource source;
    DynamicsParams params;
    std::optional<double> cod;
    std::string eigen_method = "jacobi";

    auto* margin = app.add_subcommand("margin", "Evaluate the sufficient condition and margin for one graph");
    source.attach(margin);
    margin->add_option("--a", params.a, "Linear rate a");
    margin->add_option("--delta", params.delta, "Sector parameter delta (> 1)");
    margin->add_option("--g", params.g, "Coupling gain");
    margin->add_option("--cod", cod, "Maximum CoD (default: read from the graph)");
    margin->add_option("--eigen-method", eigen_method, "jacobi | tridiagonal_ql");

    auto* optimal = app.add_subcommand("optimal-gain", "Optimal and saddle-point coupling gains");
    source.attach(optimal);
    optimal->add_option("--a", params.a, "Linear rate a");
    optimal->add_option("--delta", params.delta, "Sector parameter delta (> 1)");
    optimal->add_option("--cod", cod, "Maximum CoD (default: read from the graph)");
    optimal->add_option("--eigen-method", eigen_method, "jacobi | tridiagonal_ql");

    std::string experiment;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> runs;
    std::optional<std::size_t> horizon;
    std::optional<unsigned> threads;
    auto attach_run_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "JSON experiment config");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--runs", runs, "Monte Carlo runs");
        cmd->add_option("--horizon", horizon, "Simulation horizon");
        cmd->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    };

    auto* sweep = app.add_subcommand("sweep", "Run a named experiment and write CSV plus manifest");
    sweep->add_option("experiment", experiment, "Experiment name")->required();
    attach_run_flags(sweep);

    auto* validate = app.add_subcommand("validate", "Monte Carlo check of feasible cases (validate_mc)");
    attach_run_flags(validate);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble of the coupled dynamics");
    source.attach(simulate);
    simulate->add_option("--a", params.a, "Linear rate a");
    simulate->add_option("--delta", params.delta, "Sector parameter delta (> 1)");
    simulate->add_option("--g", params.g, "Coupling gain");
    simulate->add_option("--omega2", params.omega2, "Additive noise variance");
    std::string nonlinearity = "scaled_tanh";
    std::string xi = "gaussian";
    simulate->add_option("--nonlinearity", nonlinearity, "scaled_tanh | saturation | zero");
    simulate->add_option("--xi", xi, "gaussian | uniform_symmetric");
    simulate->add_option("--seed", seed, "Master seed");
    simulate->add_option("--runs", runs, "Monte Carlo runs");
    simulate->add_option("--horizon", horizon, "Simulation horizon");
    simulate->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");
    std::string trajectory;
    simulate->add_option("--out", trajectory, "Write the t, mse_mean, mse_p95 trajectory CSV here");

    auto* graph_cmd = app.add_subcommand("graph", "Graph utilities");
    graph_cmd->require_subcommand(1);
    auto* graph_gen = graph_cmd->add_subcommand("gen", "Generate a graph file");
    source.attach(graph_gen);
    std::string graph_out;
    graph_gen->add_option("--out", graph_out, "Output file (default: stdout)");
    auto* graph_info = graph_cmd->add_subcommand("info", "Describe a graph file");
    source.attach(graph_info);
    graph_info->add_option("--eigen-method", eigen_method, "jacobi | tridiagonal_ql");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    auto worker_count = [&](unsigned fallback) {
        const unsigned t = threads.value_or(fallback);
        return t == 0 ? std::max(1u, std::thread::hardware_concurrency()) : t;
    };

    try {
        if (*margin) {
            const auto g = source.build();
            const auto s = spectral_summary(laplacian_split(g), eigen_method_from_string(eigen_method));
            const double c = resolve_cod(cod, g);
            const auto r = check_mss(s, params, c);
            const auto crit = critical_eigenvalues(params);
            print({{"a", params.a}, {"delta", params.delta}, {"g", params.g}, {"cod", c},
                   {"spectrum", summary_json(s)}, {"margin", report_json(r)},
                   {"all_eigenvalues_feasible", check_mss_all_eigs(s, params, c)},
                   {"lambda2_star", crit.lambda2_star}, {"lambdaN_star", crit.lambdaN_star}});
        } else if (*optimal) {
            const auto g = source.build();
            const auto s = spectral_summary(laplacian_split(g), eigen_method_from_string(eigen_method));
            const double c = resolve_cod(cod, g);
            const auto opt = optimal_gain(s, params.a, params.delta, c);
            json out{{"a", params.a}, {"delta", params.delta}, {"cod", c}, {"spectrum", summary_json(s)},
                     {"g_star", opt.g_star}, {"margin_at_g_star", report_json(opt.report)}};
            if (const auto saddle = saddle_gain(s, params.a, params.delta, c))
                out["saddle"] = {{"g_e", saddle->g_e}, {"alpha0_sq", saddle->alpha0_sq}};
            else
                out["saddle"] = nullptr;
            print(out);
        } else if (*sweep || *validate) {
            ExperimentSpec spec = !config.empty() ? load_spec(config)
                                  : *sweep        ? preset(experiment_from_string(experiment))
                                                  : preset(ExperimentName::validate_mc);
            if (*sweep && !config.empty() && to_string(spec.name) != experiment)
                throw ParameterError("config names experiment '" + to_string(spec.name) + "', not '" + experiment + "'");
            if (*validate && spec.name != ExperimentName::validate_mc)
                throw ParameterError("validate needs a validate_mc config");
            if (seed) spec.seed = *seed;
            if (out_dir) spec.out_dir = *out_dir;
            if (runs) spec.runs = *runs;
            if (horizon) spec.horizon = *horizon;
            spec.threads = worker_count(spec.threads);
            validate_spec(spec);
            const auto result = run_experiment(spec);
            print(result.summary);
            if (!result.ok) return kExitFailure;
        } else if (*simulate) {
            SimConfig cfg{source.build(), params, Nonlinearity{nonlinearity_from_string(nonlinearity), params.delta}};
            cfg.n_runs = runs.value_or(100);
            cfg.horizon = horizon.value_or(1000);
            cfg.rng_seed = seed.value_or(1);
            cfg.xi_distribution = xi_distribution_from_string(xi);
            cfg.threads = worker_count(1);
            const auto e = run_ensemble(cfg);
            json out{{"n_runs", e.n_runs}, {"diverged_runs", e.diverged_runs}, {"fitted_floor", e.fitted_floor},
                     {"fit_points", e.fit_points}};
            out["fitted_beta"] = e.fitted_beta ? json(*e.fitted_beta) : json(nullptr);
            out["e0"] = e.mse_mean.empty() ? json(nullptr) : json(e.mse_mean.front());
            out["e_final"] = e.mse_mean.empty() ? json(nullptr) : json(e.mse_mean.back());
            if (!trajectory.empty()) {
                write_csv_file(trajectory, trajectory_table(e), {std::string("syncmargin ") + kVersion});
                out["trajectory"] = trajectory;
            }
            print(out);
        } else if (*graph_gen) {
            const auto g = source.build();
            if (graph_out.empty()) {
                write_graph(std::cout, g);
            } else {
                std::ofstream os(graph_out, std::ios::binary);
                if (!os) throw FormatError("cannot open '" + graph_out + "' for writing");
                write_graph(os, g);
                print({{"file", graph_out}, {"nodes", g.n_nodes()}, {"edges", g.n_edges()}});
            }
        } else if (*graph_info) {
            const auto g = source.build();
            json out{{"nodes", g.n_nodes()}, {"edges", g.n_edges()}, {"uncertain_edges", g.n_uncertain()},
                     {"max_cod", g.max_cod()}, {"connected", g.is_connected()}};
            if (g.is_connected() && g.n_nodes() >= 2)
                out["spectrum"] = summary_json(spectral_summary(laplacian_split(g), eigen_method_from_string(eigen_method)));
            print(out);
        }
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UnsupportedOperation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const GenerationError& e) {
        std::cerr << "generation failure: " << e.what() << '\n';
        return kExitFailure;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitFailure;
    } catch (const ContractViolation& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitFailure;
    }
    return 0;
}
