#ifndef QGS_EXPERIMENT_HPP
#define QGS_EXPERIMENT_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qgs/backward.hpp"
#include "qgs/baselines.hpp"
#include "qgs/config.hpp"
#include "qgs/filter.hpp"
#include "qgs/metrics.hpp"
#include "qgs/smoother.hpp"

namespace qgs {

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Density snapshot at one probe time: either a Gaussian mixture or an
/// equal-weight sample set, evaluated on a grid on demand.
struct DensitySnapshot {
    int t = 0;
    bool is_mixture = true;
    GaussianMixture mixture;
    Eigen::MatrixXd samples;

    std::vector<double> density(const GridSpec& grid) const {
        return is_mixture ? mixture_density_on_grid(mixture, grid.values())
                          : kde_on_grid(samples, grid.values());
    }
};

struct AlgoRunResult {
    std::string name;
    double seconds = 0.0;
    std::vector<Eigen::VectorXd> means;  // state estimates per t
    std::vector<Eigen::VectorXd> vars;   // estimate variance diagonals per t
    std::vector<DensitySnapshot> snapshots;
};

struct RunResult {
    int run = 0;
    std::uint64_t seed = 0;
    Trajectory trajectory;
    std::vector<AlgoRunResult> algos;
    std::vector<std::string> errors;
};

struct MetricsRecord {
    int run = 0;
    std::string algo;
    double state_mse = 0.0;
    double seconds = 0.0;
};

struct PdfDistanceRecord {
    int run = 0;
    std::string algo;
    int t = 0;
    double l1 = 0.0;
};

struct MonteCarloResult {
    std::vector<RunResult> runs;
    std::vector<MetricsRecord> metrics;
    std::vector<PdfDistanceRecord> pdf_distances;
};

namespace detail {

inline bool wants(const ExperimentConfig& cfg, const std::string& algo) {
    for (const auto& a : cfg.algos) {
        if (a == algo) return true;
    }
    return false;
}

template <typename F>
double timed(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<int> probe_times(const ExperimentConfig& cfg) {
    std::vector<int> ts;
    for (int t : cfg.pdf_times) {
        if (t >= 1 && t <= cfg.horizon) ts.push_back(t);
    }
    return ts;
}

inline void snapshot_mixtures(AlgoRunResult& out, const std::vector<int>& times,
                              const std::vector<GaussianMixture>& per_t) {
    for (int t : times) {
        DensitySnapshot s;
        s.t = t;
        s.is_mixture = true;
        s.mixture = per_t[t - 1];
        out.snapshots.push_back(std::move(s));
    }
}

inline void snapshot_samples(AlgoRunResult& out, const std::vector<int>& times,
                             const std::vector<Eigen::MatrixXd>& per_t) {
    for (int t : times) {
        DensitySnapshot s;
        s.t = t;
        s.is_mixture = false;
        s.samples = per_t[t - 1];
        out.snapshots.push_back(std::move(s));
    }
}

inline void estimates_from_gaussians(AlgoRunResult& out, const std::vector<Gaussian>& per_t,
                                     Eigen::Index n) {
    for (const auto& g : per_t) {
        out.means.push_back(g.mean.head(n));
        out.vars.push_back(g.cov.diagonal().head(n));
    }
}

} // namespace detail

/// Execute every enabled algorithm on one simulated trajectory.
inline RunResult execute_run(const ExperimentConfig& cfg, int run_index, std::uint64_t run_seed,
                             bool with_snapshots = true) {
    RunResult rr;
    rr.run = run_index;
    rr.seed = run_seed;
    rr.trajectory = simulate(cfg.model, cfg.nonlinearity, cfg.horizon, cfg.input, run_seed);
    const auto& traj = rr.trajectory;
    const Eigen::Index n = cfg.model.state_dim();
    const std::vector<int> times = with_snapshots ? detail::probe_times(cfg) : std::vector<int>{};
    const FilterOptions fopts = cfg.filter_options();

    FilterRun qgsf_run;
    bool have_qgsf = false;
    if (detail::wants(cfg, "qgsf") || detail::wants(cfg, "qgss")) {
        AlgoRunResult res;
        res.name = "qgsf";
        try {
            res.seconds = detail::timed([&] {
                qgsf_run = run_filter(cfg.model, cfg.nonlinearity, traj.measurements, traj.inputs,
                                      fopts);
            });
            have_qgsf = true;
            detail::estimates_from_gaussians(res, filtered_estimates(qgsf_run), n);
            if (!times.empty()) {
                std::vector<GaussianMixture> per_t;
                for (const auto& s : qgsf_run.states) per_t.push_back(s.filtered);
                detail::snapshot_mixtures(res, times, per_t);
            }
            if (detail::wants(cfg, "qgsf")) rr.algos.push_back(std::move(res));
        } catch (const Error& e) {
            rr.errors.push_back("qgsf: " + std::string(e.what()));
        }
    }

    if (detail::wants(cfg, "qgss") && have_qgsf) {
        AlgoRunResult res;
        res.name = "qgss";
        try {
            SmootherRun sm;
            res.seconds = detail::timed([&] {
                const BackwardRun back = run_backward(cfg.model, cfg.nonlinearity,
                                                      traj.measurements, traj.inputs, fopts);
                sm = run_smoother(qgsf_run, back, cfg.model, cfg.nonlinearity, traj.measurements,
                                  traj.inputs, fopts);
            });
            detail::estimates_from_gaussians(res, smoothed_estimates(sm), n);
            if (!times.empty()) {
                std::vector<GaussianMixture> per_t;
                for (const auto& s : sm.smoothed) per_t.push_back(s.posterior);
                detail::snapshot_mixtures(res, times, per_t);
            }
            rr.algos.push_back(std::move(res));
        } catch (const Error& e) {
            rr.errors.push_back("qgss: " + std::string(e.what()));
        }
    }

    if (detail::wants(cfg, "ekf") || detail::wants(cfg, "eks")) {
        try {
            const ExtendedModel ext = build_extended_system(cfg.model);
            EkfRun ekf_run;
            AlgoRunResult fres;
            fres.name = "ekf";
            fres.seconds = detail::timed([&] {
                ekf_run = ekf(ext, cfg.model, cfg.nonlinearity, traj.measurements, traj.inputs);
            });
            detail::estimates_from_gaussians(fres, ekf_run.filtered, n);
            if (detail::wants(cfg, "ekf")) rr.algos.push_back(std::move(fres));
            if (detail::wants(cfg, "eks")) {
                AlgoRunResult sres;
                sres.name = "eks";
                std::vector<Gaussian> sm;
                sres.seconds = detail::timed([&] { sm = eks(ekf_run, ext); });
                detail::estimates_from_gaussians(sres, sm, n);
                rr.algos.push_back(std::move(sres));
            }
        } catch (const Error& e) {
            rr.errors.push_back("ekf/eks: " + std::string(e.what()));
        }
    }

    const auto run_particle_pair = [&](const std::string& fname, const std::string& sname,
                                       int particles, int trajectories) {
        try {
            ParticleOptions popts;
            popts.n_particles = particles;
            popts.seed = run_seed;
            ParticleRun pf_run;
            AlgoRunResult fres;
            fres.name = fname;
            fres.seconds = detail::timed([&] {
                pf_run = particle_filter(cfg.model, cfg.nonlinearity, traj.measurements,
                                         traj.inputs, popts);
            });
            for (int t = 0; t < cfg.horizon; ++t) {
                fres.means.push_back(pf_run.means[t]);
                Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
                const auto& ens = pf_run.ensembles[t];
                for (int i = 0; i < particles; ++i) {
                    const Eigen::VectorXd d = ens.particles.col(i) - pf_run.means[t];
                    var += std::exp(ens.log_weights(i)) * d.cwiseProduct(d);
                }
                fres.vars.push_back(var);
            }
            if (!times.empty()) {
                std::vector<Eigen::MatrixXd> per_t;
                for (const auto& e : pf_run.ensembles) per_t.push_back(e.resampled);
                detail::snapshot_samples(fres, times, per_t);
            }
            rr.algos.push_back(std::move(fres));
            if (!sname.empty() && detail::wants(cfg, sname)) {
                AlgoRunResult sres;
                sres.name = sname;
                ParticleSmootherRun ps_run;
                sres.seconds = detail::timed([&] {
                    ps_run = particle_smoother(pf_run, cfg.model, traj.inputs, trajectories,
                                               run_seed);
                });
                for (int t = 0; t < cfg.horizon; ++t) {
                    sres.means.push_back(ps_run.means[t]);
                    Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
                    for (int i = 0; i < trajectories; ++i) {
                        const Eigen::VectorXd d = ps_run.ensembles[t].col(i) - ps_run.means[t];
                        var += d.cwiseProduct(d);
                    }
                    sres.vars.push_back(var / trajectories);
                }
                if (!times.empty()) detail::snapshot_samples(sres, times, ps_run.ensembles);
                rr.algos.push_back(std::move(sres));
            }
        } catch (const Error& e) {
            rr.errors.push_back(fname + "/" + sname + ": " + std::string(e.what()));
        }
    };

    if (detail::wants(cfg, "pf") || detail::wants(cfg, "ps")) {
        run_particle_pair("pf", "ps", cfg.pf_particles,
                          std::min(cfg.pf_particles, cfg.smoother_trajectories));
    }
    if (detail::wants(cfg, "gt") || detail::wants(cfg, "gts")) {
        run_particle_pair("gt", "gts", cfg.gt_particles, cfg.smoother_trajectories);
    }
    return rr;
}

/// Reference (ground-truth) algorithm for each estimator when computing
/// PDF distances.
inline std::string gt_counterpart(const std::string& algo) {
    if (algo == "qgsf" || algo == "ekf" || algo == "pf") return "gt";
    if (algo == "qgss" || algo == "eks" || algo == "ps") return "gts";
    return "";
}

inline int thread_count_override(int runs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("QGS_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) hw = static_cast<unsigned>(v);
    }
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(runs)));
}

/// Monte Carlo execution: run i uses seed base ^ i; runs execute
/// concurrently and aggregate in fixed run order.
inline MonteCarloResult monte_carlo(const ExperimentConfig& cfg, bool with_snapshots = true) {
    MonteCarloResult mc;
    mc.runs.resize(cfg.runs);
    const int workers = thread_count_override(cfg.runs);
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < cfg.runs; i = next.fetch_add(1)) {
                mc.runs[i] = execute_run(cfg, i, cfg.seed ^ static_cast<std::uint64_t>(i),
                                         with_snapshots);
            }
        });
    }
    for (auto& th : pool) th.join();

    for (const auto& rr : mc.runs) {
        for (const auto& algo : rr.algos) {
            MetricsRecord rec;
            rec.run = rr.run;
            rec.algo = algo.name;
            rec.state_mse = mse(rr.trajectory.states, algo.means);
            rec.seconds = algo.seconds;
            mc.metrics.push_back(rec);
        }
        // Grid distances against the ground-truth snapshots.
        for (const auto& algo : rr.algos) {
            const std::string ref_name = gt_counterpart(algo.name);
            if (ref_name.empty() || algo.name == "gt" || algo.name == "gts") continue;
            const AlgoRunResult* ref = nullptr;
            for (const auto& cand : rr.algos) {
                if (cand.name == ref_name) ref = &cand;
            }
            if (!ref) continue;
            for (std::size_t s = 0; s < algo.snapshots.size() && s < ref->snapshots.size(); ++s) {
                GridSpec grid;
                if (cfg.grid) {
                    grid = *cfg.grid;
                } else {
                    Gaussian summary;
                    summary.mean = Eigen::VectorXd::Constant(1, ref->means[ref->snapshots[s].t - 1](0));
                    summary.cov = Eigen::MatrixXd::Constant(
                        1, 1, std::max(ref->vars[ref->snapshots[s].t - 1](0), 1e-12));
                    grid = grid_around(summary);
                }
                mc.pdf_distances.push_back(
                    {rr.run, algo.name, algo.snapshots[s].t,
                     pdf_distance(algo.snapshots[s].density(grid), ref->snapshots[s].density(grid),
                                  grid)});
            }
        }
    }
    return mc;
}

// --------------------------------------------------------------------------
// File emission
// --------------------------------------------------------------------------

inline void write_states_csv(const std::string& path, const Trajectory& traj,
                             const AlgoRunResult& algo) {
    std::ofstream out(path);
    const Eigen::Index n = traj.states.front().size();
    out << "t";
    for (Eigen::Index i = 1; i <= n; ++i) out << ",x_true_" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",xhat_" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",var_" << i;
    out << "\n";
    for (int t = 0; t < traj.horizon(); ++t) {
        out << (t + 1);
        for (Eigen::Index i = 0; i < n; ++i) out << "," << format_value(traj.states[t](i));
        for (Eigen::Index i = 0; i < n; ++i) out << "," << format_value(algo.means[t](i));
        for (Eigen::Index i = 0; i < n; ++i) out << "," << format_value(algo.vars[t](i));
        out << "\n";
    }
}

inline void write_pdf_csv(const std::string& path, const std::string& algo, int t,
                          const GridSpec& grid, const std::vector<double>& density) {
    std::ofstream out(path);
    out << "# algo=" << algo << " t=" << t << "\n";
    out << "x,density\n";
    const auto xs = grid.values();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << format_value(xs[i]) << "," << format_value(density[i]) << "\n";
    }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    const Eigen::Index n = traj.states.front().size();
    const Eigen::Index m = traj.inputs.front().size();
    out << "t";
    for (Eigen::Index i = 1; i <= m; ++i) out << ",u_" << i;
    for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
    out << ",r,z,y\n";
    for (int t = 0; t < traj.horizon(); ++t) {
        out << (t + 1);
        for (Eigen::Index i = 0; i < m; ++i) out << "," << format_value(traj.inputs[t](i));
        for (Eigen::Index i = 0; i < n; ++i) out << "," << format_value(traj.states[t](i));
        out << "," << format_value(traj.linear_outputs[t]) << ","
            << format_value(traj.noiseless_outputs[t]) << ","
            << format_value(traj.measurements[t]) << "\n";
    }
}

/// Emit one Monte Carlo result tree: per-run state CSVs and PDF grids, a
/// metrics table, PDF distances and a median summary.
inline void write_monte_carlo(const MonteCarloResult& mc, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path root(cfg.out_dir);
    fs::create_directories(root);

    for (const auto& rr : mc.runs) {
        char dirname[32];
        std::snprintf(dirname, sizeof(dirname), "run_%03d", rr.run);
        const fs::path rundir = root / dirname;
        fs::create_directories(rundir);
        write_trajectory_csv((rundir / "trajectory.csv").string(), rr.trajectory);
        for (const auto& algo : rr.algos) {
            write_states_csv((rundir / ("states_" + algo.name + ".csv")).string(), rr.trajectory,
                             algo);
            for (const auto& snap : algo.snapshots) {
                GridSpec grid = cfg.grid ? *cfg.grid
                                         : grid_around([&] {
                                               Gaussian g;
                                               g.mean = Eigen::VectorXd::Constant(
                                                   1, algo.means[snap.t - 1](0));
                                               g.cov = Eigen::MatrixXd::Constant(
                                                   1, 1, std::max(algo.vars[snap.t - 1](0), 1e-12));
                                               return g;
                                           }());
                write_pdf_csv(
                    (rundir / ("pdf_" + algo.name + "_t" + std::to_string(snap.t) + ".csv"))
                        .string(),
                    algo.name, snap.t, grid, snap.density(grid));
            }
        }
    }

    {
        std::ofstream out((root / "metrics.csv").string());
        out << "run,algo,state_mse,seconds\n";
        for (const auto& r : mc.metrics) {
            out << r.run << "," << r.algo << "," << format_value(r.state_mse) << ","
                << format_value(r.seconds) << "\n";
        }
    }
    if (!mc.pdf_distances.empty()) {
        std::ofstream out((root / "pdf_l1.csv").string());
        out << "run,algo,t,l1_vs_gt\n";
        for (const auto& r : mc.pdf_distances) {
            out << r.run << "," << r.algo << "," << r.t << "," << format_value(r.l1) << "\n";
        }
    }
    {
        std::map<std::string, std::vector<double>> mses, secs;
        for (const auto& r : mc.metrics) {
            mses[r.algo].push_back(r.state_mse);
            secs[r.algo].push_back(r.seconds);
        }
        std::ofstream out((root / "summary.csv").string());
        out << "algo,median_state_mse,median_seconds,runs\n";
        for (const auto& [algo, xs] : mses) {
            out << algo << "," << format_value(median(xs)) << ","
                << format_value(median(secs[algo])) << "," << xs.size() << "\n";
        }
    }
    bool any_error = false;
    for (const auto& rr : mc.runs) any_error = any_error || !rr.errors.empty();
    if (any_error) {
        std::ofstream out((root / "failures.csv").string());
        out << "run,message\n";
        for (const auto& rr : mc.runs) {
            for (const auto& e : rr.errors) out << rr.run << ",\"" << e << "\"\n";
        }
    }
}

/// Median wall-clock per algorithm over the configured runs, with the ratio
/// against the particle filter (the hardware-independent ordering claim).
struct BenchmarkRow {
    std::string algo;
    double median_seconds = 0.0;
    double ratio_vs_pf = 0.0;
};

inline std::vector<BenchmarkRow> benchmark(const ExperimentConfig& cfg) {
    MonteCarloResult mc = monte_carlo(cfg, /*with_snapshots=*/false);
    std::map<std::string, std::vector<double>> secs;
    for (const auto& r : mc.metrics) secs[r.algo].push_back(r.seconds);
    double pf_median = 0.0;
    if (secs.count("pf")) pf_median = median(secs["pf"]);
    std::vector<BenchmarkRow> rows;
    for (const auto& algo : cfg.algos) {
        if (!secs.count(algo)) continue;  // disabled or failed algorithms are omitted
        BenchmarkRow row;
        row.algo = algo;
        row.median_seconds = median(secs[algo]);
        row.ratio_vs_pf = pf_median > 0.0 ? row.median_seconds / pf_median : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline void write_benchmark(const std::vector<BenchmarkRow>& rows, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream out((fs::path(out_dir) / "benchmark.csv").string());
    out << "algo,median_seconds,ratio_vs_pf\n";
    for (const auto& r : rows) {
        out << r.algo << "," << format_value(r.median_seconds) << ","
            << format_value(r.ratio_vs_pf) << "\n";
    }
}

} // namespace qgs

#endif // QGS_EXPERIMENT_HPP
