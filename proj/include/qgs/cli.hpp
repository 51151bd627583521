#ifndef QGS_CLI_HPP
#define QGS_CLI_HPP

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qgs/config.hpp"
#include "qgs/experiment.hpp"
#include "qgs/quadrature.hpp"

namespace qgs {

namespace cli_detail {

inline GridSpec parse_grid_flag(const std::string& s) {
    GridSpec g;
    char c1 = 0, c2 = 0;
    std::istringstream in(s);
    if (!(in >> g.lo >> c1 >> g.hi >> c2 >> g.points) || c1 != ':' || c2 != ':')
        throw ConfigError("--grid expects LO:HI:POINTS");
    return g;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string algos;
    std::string grid;

    void attach(CLI::App* app, bool config_required = true) {
        auto* c = app->add_option("--config", config_path, "experiment config file (JSON)");
        if (config_required) c->required();
        app->add_option("--seed", seed, "base seed override");
        app->add_option("--out", out_dir, "output directory override");
        app->add_option("--algos", algos, "comma-separated algorithm list");
        app->add_option("--grid", grid, "density grid as LO:HI:POINTS");
    }

    ExperimentConfig load() const {
        ExperimentConfig cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!algos.empty()) cfg.algos = split_list(algos);
        if (!grid.empty()) cfg.grid = parse_grid_flag(grid);
        return cfg;
    }
};

inline int run_single(const ExperimentConfig& cfg) {
    RunResult rr = execute_run(cfg, 0, cfg.seed);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    write_trajectory_csv((fs::path(cfg.out_dir) / "trajectory.csv").string(), rr.trajectory);
    for (const auto& algo : rr.algos) {
        write_states_csv((fs::path(cfg.out_dir) / ("states_" + algo.name + ".csv")).string(),
                         rr.trajectory, algo);
        for (const auto& snap : algo.snapshots) {
            GridSpec grid = cfg.grid ? *cfg.grid : grid_around([&] {
                Gaussian g;
                g.mean = Eigen::VectorXd::Constant(1, algo.means[snap.t - 1](0));
                g.cov = Eigen::MatrixXd::Constant(1, 1, std::max(algo.vars[snap.t - 1](0), 1e-12));
                return g;
            }());
            write_pdf_csv((fs::path(cfg.out_dir) /
                           ("pdf_" + algo.name + "_t" + std::to_string(snap.t) + ".csv"))
                              .string(),
                          algo.name, snap.t, grid, snap.density(grid));
        }
    }
    for (const auto& e : rr.errors) std::cerr << "warning: " << e << "\n";
    std::cout << "wrote results for " << rr.algos.size() << " algorithm(s) to " << cfg.out_dir
              << "\n";
    return rr.errors.empty() ? 0 : 2;
}

} // namespace cli_detail

/// Entry point shared by the installed binary and the test suite.
/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
inline int cli_main(std::vector<std::string> args) {
    CLI::App app{"Quadrature Gaussian sum filtering and smoothing for Wiener systems"};
    app.require_subcommand(1);

    // rule
    auto* rule_cmd = app.add_subcommand("rule", "print Gauss-Legendre nodes and weights");
    int rule_order = 10;
    rule_cmd->add_option("--order", rule_order, "rule order L")->required();

    // presets
    auto* presets_cmd = app.add_subcommand("presets", "list model/nonlinearity presets");

    // simulate / filter / smooth / mc / benchmark
    cli_detail::CommonFlags sim_flags, filter_flags, smooth_flags, mc_flags, bench_flags;
    auto* sim_cmd = app.add_subcommand("simulate", "simulate one trajectory");
    sim_flags.attach(sim_cmd);
    auto* filter_cmd = app.add_subcommand("filter", "run filtering algorithms on one trajectory");
    filter_flags.attach(filter_cmd);
    auto* smooth_cmd = app.add_subcommand("smooth", "run smoothing algorithms on one trajectory");
    smooth_flags.attach(smooth_cmd);
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo study over many runs");
    mc_flags.attach(mc_cmd);
    auto* bench_cmd = app.add_subcommand("benchmark", "median wall-clock per algorithm");
    bench_flags.attach(bench_cmd);

    std::vector<const char*> argv;
    argv.push_back("qgs");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (rule_cmd->parsed()) {
            const QuadratureRule rule = legendre_rule(rule_order);
            std::cout << "order " << rule.order << "\n";
            for (int i = 0; i < rule.order; ++i) {
                std::cout << format_value(rule.nodes[i]) << " " << format_value(rule.weights[i])
                          << "\n";
            }
            return 0;
        }
        if (presets_cmd->parsed()) {
            std::cout << "experiment configs:";
            for (const auto& n : config_preset_names()) std::cout << " " << n;
            std::cout << "\nnonlinearities:";
            for (const auto& n : nonlinearity_preset_names()) std::cout << " " << n;
            std::cout << "\n";
            return 0;
        }
        if (sim_cmd->parsed()) {
            const ExperimentConfig cfg = sim_flags.load();
            const Trajectory traj =
                simulate(cfg.model, cfg.nonlinearity, cfg.horizon, cfg.input, cfg.seed);
            std::filesystem::create_directories(cfg.out_dir);
            write_trajectory_csv(
                (std::filesystem::path(cfg.out_dir) / "trajectory.csv").string(), traj);
            std::cout << "wrote " << cfg.out_dir << "/trajectory.csv (N=" << cfg.horizon << ")\n";
            return 0;
        }
        if (filter_cmd->parsed()) {
            ExperimentConfig cfg = filter_flags.load();
            if (filter_flags.algos.empty()) cfg.algos = {"qgsf", "ekf", "pf"};
            return cli_detail::run_single(cfg);
        }
        if (smooth_cmd->parsed()) {
            ExperimentConfig cfg = smooth_flags.load();
            if (smooth_flags.algos.empty()) cfg.algos = {"qgsf", "qgss", "eks", "ps"};
            return cli_detail::run_single(cfg);
        }
        if (mc_cmd->parsed()) {
            const ExperimentConfig cfg = mc_flags.load();
            const MonteCarloResult mc = monte_carlo(cfg);
            write_monte_carlo(mc, cfg);
            int failures = 0;
            for (const auto& rr : mc.runs) failures += static_cast<int>(rr.errors.size());
            std::cout << "completed " << cfg.runs << " runs (" << failures << " failures), wrote "
                      << cfg.out_dir << "\n";
            return 0;
        }
        if (bench_cmd->parsed()) {
            const ExperimentConfig cfg = bench_flags.load();
            const auto rows = benchmark(cfg);
            write_benchmark(rows, cfg.out_dir);
            for (const auto& r : rows) {
                std::cout << r.algo << " median " << r.median_seconds << " s";
                if (r.ratio_vs_pf > 0.0) std::cout << " (x" << r.ratio_vs_pf << " of pf)";
                std::cout << "\n";
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace qgs

#endif // QGS_CLI_HPP
