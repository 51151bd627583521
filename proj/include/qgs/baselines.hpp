#ifndef QGS_BASELINES_HPP
#define QGS_BASELINES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/gaussian.hpp"
#include "qgs/likelihood.hpp"
#include "qgs/model.hpp"
#include "qgs/numeric.hpp"
#include "qgs/rng.hpp"

namespace qgs {

// --------------------------------------------------------------------------
// Kalman filter and Rauch-Tung-Striebel smoother on the linear block
// (nonlinearity bypassed: y is treated as the linear output).
// --------------------------------------------------------------------------

struct KalmanStep {
    Eigen::VectorXd filtered_mean, predicted_mean;      // x_{t|t}, x_{t+1|t}
    Eigen::MatrixXd filtered_cov, predicted_cov;        // Sigma_{t|t}, Sigma_{t+1|t}
    Eigen::VectorXd prior_mean;                         // x_{t|t-1}
    Eigen::MatrixXd prior_cov;                          // Sigma_{t|t-1}
    Eigen::MatrixXd gain;                               // K_t
    double log_evidence = 0.0;
};

struct KalmanRun {
    std::vector<KalmanStep> steps;
    double total_log_evidence = 0.0;
};

inline KalmanRun kalman_filter(const WienerModel& model, const std::vector<double>& measurements,
                               const std::vector<Eigen::VectorXd>& inputs) {
    const int horizon = static_cast<int>(measurements.size());
    KalmanRun run;
    run.steps.reserve(horizon);
    Eigen::VectorXd mean = model.mu1;
    Eigen::MatrixXd cov = model.P1;
    for (int t = 1; t <= horizon; ++t) {
        const Eigen::VectorXd& u = inputs[t - 1];
        KalmanStep step;
        step.prior_mean = mean;
        step.prior_cov = cov;
        const Eigen::RowVectorXd cq = model.C * cov;
        const double s = model.R + cq.dot(model.C);
        if (!(s > 0.0)) throw DegenerateInnovationError("kalman_filter: degenerate innovation");
        step.gain = cq.transpose() / s;
        const double innov = measurements[t - 1] - model.C.dot(mean) - model.D.dot(inputs[t - 1]);
        step.log_evidence = log_gauss_scalar(measurements[t - 1],
                                             model.C.dot(mean) + model.D.dot(inputs[t - 1]), s);
        step.filtered_mean = mean + step.gain * innov;
        step.filtered_cov = symmetrize(cov - step.gain * cq);
        step.predicted_mean = model.A * step.filtered_mean + model.B * u;
        step.predicted_cov =
            symmetrize(model.Q + model.A * step.filtered_cov * model.A.transpose());
        mean = step.predicted_mean;
        cov = step.predicted_cov;
        run.total_log_evidence += step.log_evidence;
        run.steps.push_back(std::move(step));
    }
    return run;
}

struct SmootherStep {
    Eigen::VectorXd mean;       // x_{t|N}
    Eigen::MatrixXd cov;        // Sigma_{t|N}
    Eigen::MatrixXd cross_cov;  // M_{t|N} = Cov(x_t, x_{t-1} | y_{1:N}), t >= 2
    Eigen::MatrixXd cross_identity;  // Sigma_{t|N} K_{t-1|t}^T, for the identity check
    Eigen::MatrixXd gain;       // K_{t|t+1}
};

/// RTS smoother plus the lag-one cross-covariance recursion,
/// M_{N|N} = (I - K_N C) A Sigma_{N-1|N-1}.
inline std::vector<SmootherStep> kalman_smoother(const KalmanRun& kf, const WienerModel& model) {
    const int horizon = static_cast<int>(kf.steps.size());
    std::vector<SmootherStep> out(horizon);
    const Eigen::Index n = model.state_dim();

    const auto smoother_gain = [&](int t_idx) {
        // K_{t|t+1} = Sigma_{t|t} A^T (Sigma_{t+1|t})^{-1}
        const Eigen::MatrixXd lp = cholesky_lower(kf.steps[t_idx].predicted_cov);
        const Eigen::MatrixXd rhs = lp.triangularView<Eigen::Lower>().solve(
            (model.A * kf.steps[t_idx].filtered_cov).eval());
        return Eigen::MatrixXd(
            lp.transpose().triangularView<Eigen::Upper>().solve(rhs).transpose());
    };

    out[horizon - 1].mean = kf.steps[horizon - 1].filtered_mean;
    out[horizon - 1].cov = kf.steps[horizon - 1].filtered_cov;
    if (horizon >= 2) {
        out[horizon - 1].cross_cov =
            (Eigen::MatrixXd::Identity(n, n) - kf.steps[horizon - 1].gain * model.C) * model.A *
            kf.steps[horizon - 2].filtered_cov;
    }
    for (int t = horizon - 1; t >= 1; --t) {
        const int i = t - 1;  // 0-based index of time t
        const Eigen::MatrixXd k = smoother_gain(i);
        out[i].gain = k;
        out[i].mean = kf.steps[i].filtered_mean + k * (out[i + 1].mean - kf.steps[i].predicted_mean);
        out[i].cov = symmetrize(kf.steps[i].filtered_cov +
                                k * (out[i + 1].cov - kf.steps[i].predicted_cov) * k.transpose());
    }
    // Cross-covariance recursion and the Sigma_{t|N} K_{t-1|t}^T sequence.
    for (int t = horizon - 1; t >= 2; --t) {
        const int i = t - 1;
        out[i].cross_cov = kf.steps[i].filtered_cov * out[i - 1].gain.transpose() +
                           out[i].gain *
                               (out[i + 1].cross_cov - model.A * kf.steps[i].filtered_cov) *
                               out[i - 1].gain.transpose();
    }
    for (int t = horizon; t >= 2; --t) {
        const int i = t - 1;
        out[i].cross_identity = out[i].cov * out[i - 1].gain.transpose();
    }
    return out;
}

// --------------------------------------------------------------------------
// Extended system: state (x_t, r_t) makes the dynamics linear and pushes the
// nonlinearity into the output map, as used by the EKF baseline.
// --------------------------------------------------------------------------

struct ExtendedModel {
    Eigen::MatrixXd A;  // (n+1) x (n+1)
    Eigen::MatrixXd B;  // (n+1) x 2m
    Eigen::RowVectorXd C;  // selects r
    Eigen::RowVectorXd D;  // zero
    Eigen::MatrixXd Q;  // (n+1) x (n+1)
    double output_noise = 0.0;  // P of the base model

    Eigen::Index dim() const { return A.rows(); }
};

inline ExtendedModel build_extended_system(const WienerModel& model) {
    const Eigen::Index n = model.state_dim();
    const Eigen::Index m = model.input_dim();
    ExtendedModel ext;
    ext.A = Eigen::MatrixXd::Zero(n + 1, n + 1);
    ext.A.topLeftCorner(n, n) = model.A;
    ext.A.bottomLeftCorner(1, n) = model.C * model.A;
    ext.B = Eigen::MatrixXd::Zero(n + 1, 2 * m);
    ext.B.topLeftCorner(n, m) = model.B;
    ext.B.bottomLeftCorner(1, m) = model.C * model.B;
    ext.B.bottomRightCorner(1, m) = model.D;
    ext.C = Eigen::RowVectorXd::Zero(n + 1);
    ext.C(n) = 1.0;
    ext.D = Eigen::RowVectorXd::Zero(2 * m);
    ext.Q = Eigen::MatrixXd::Zero(n + 1, n + 1);
    ext.Q.topLeftCorner(n, n) = model.Q;
    const Eigen::VectorXd qc = model.Q * model.C.transpose();
    ext.Q.topRightCorner(n, 1) = qc;
    ext.Q.bottomLeftCorner(1, n) = qc.transpose();
    ext.Q(n, n) = model.C.dot(qc) + model.R;
    ext.output_noise = model.P;
    return ext;
}

/// Prior over (x_1, r_1); r_1 = C x_1 + D u_1 + v_1 depends on the first input.
inline Gaussian extended_prior(const WienerModel& model, const Eigen::VectorXd& u1) {
    const Eigen::Index n = model.state_dim();
    Gaussian g;
    g.mean.resize(n + 1);
    g.mean.head(n) = model.mu1;
    g.mean(n) = model.C.dot(model.mu1) + model.D.dot(u1);
    g.cov = Eigen::MatrixXd::Zero(n + 1, n + 1);
    g.cov.topLeftCorner(n, n) = model.P1;
    const Eigen::VectorXd pc = model.P1 * model.C.transpose();
    g.cov.topRightCorner(n, 1) = pc;
    g.cov.bottomLeftCorner(1, n) = pc.transpose();
    g.cov(n, n) = model.C.dot(pc) + model.R;
    return g;
}

/// Stacked input [u_t; u_{t+1}] with u_{N+1} = 0.
inline Eigen::VectorXd extended_input(const std::vector<Eigen::VectorXd>& inputs, int t) {
    const Eigen::Index m = inputs.front().size();
    Eigen::VectorXd u(2 * m);
    u.head(m) = inputs[t - 1];
    u.tail(m) = t < static_cast<int>(inputs.size()) ? inputs[t]
                                                    : Eigen::VectorXd::Zero(m).eval();
    return u;
}

struct EkfRun {
    std::vector<Gaussian> filtered;   // over the extended state
    std::vector<Gaussian> predicted;  // one-step predictions (t+1|t)
    std::vector<Gaussian> prior;      // (t|t-1)
};

/// Extended Kalman filter on the extended system; the output Jacobian is
/// [0 ... 0, g'(r_hat)] with one-sided slopes at kinks.
inline EkfRun ekf(const ExtendedModel& ext, const WienerModel& model,
                  const PiecewiseNonlinearity& nl, const std::vector<double>& measurements,
                  const std::vector<Eigen::VectorXd>& inputs) {
    const int horizon = static_cast<int>(measurements.size());
    const Eigen::Index ne = ext.dim();
    EkfRun run;
    run.filtered.reserve(horizon);

    Gaussian state = extended_prior(model, inputs.front());
    for (int t = 1; t <= horizon; ++t) {
        run.prior.push_back(state);
        const double r_hat = state.mean(ne - 1);
        const double gp = nl.slope(r_hat);
        Eigen::RowVectorXd jac = Eigen::RowVectorXd::Zero(ne);
        jac(ne - 1) = gp;
        const Eigen::VectorXd pj = state.cov * jac.transpose();
        const double s = ext.output_noise + jac.dot(pj);
        const Eigen::VectorXd gain = pj / s;
        const double innov = measurements[t - 1] - nl.evaluate(r_hat);
        Gaussian filtered;
        filtered.mean = state.mean + gain * innov;
        filtered.cov = symmetrize(state.cov - gain * pj.transpose());
        run.filtered.push_back(filtered);

        state.mean = ext.A * filtered.mean + ext.B * extended_input(inputs, t);
        state.cov = symmetrize(ext.Q + ext.A * filtered.cov * ext.A.transpose());
        run.predicted.push_back(state);
    }
    return run;
}

/// RTS smoother over the EKF moments (dynamics of the extended system are
/// linear, so the standard backward recursion applies unchanged).
inline std::vector<Gaussian> eks(const EkfRun& run, const ExtendedModel& ext) {
    const int horizon = static_cast<int>(run.filtered.size());
    std::vector<Gaussian> out(horizon);
    out[horizon - 1] = run.filtered[horizon - 1];
    for (int i = horizon - 2; i >= 0; --i) {
        const Eigen::MatrixXd lp = cholesky_lower(run.predicted[i].cov);
        const Eigen::MatrixXd rhs = lp.triangularView<Eigen::Lower>().solve(
            (ext.A * run.filtered[i].cov).eval());
        const Eigen::MatrixXd k =
            lp.transpose().triangularView<Eigen::Upper>().solve(rhs).transpose();
        out[i].mean = run.filtered[i].mean + k * (out[i + 1].mean - run.predicted[i].mean);
        out[i].cov = symmetrize(run.filtered[i].cov +
                                k * (out[i + 1].cov - run.predicted[i].cov) * k.transpose());
    }
    return out;
}

// --------------------------------------------------------------------------
// Bootstrap particle filter with the exact (high-order quadrature)
// measurement likelihood, and a backward-simulation particle smoother.
// --------------------------------------------------------------------------

struct ParticleEnsemble {
    Eigen::MatrixXd particles;       // n x Np, pre-resampling
    Eigen::VectorXd log_weights;     // normalized, pre-resampling
    Eigen::MatrixXd resampled;       // n x Np, after systematic resampling
};

struct ParticleRun {
    std::vector<ParticleEnsemble> ensembles;  // one per t
    std::vector<Eigen::VectorXd> means;       // weighted filtered means
    std::uint64_t seed = 0;
};

/// Systematic resampling: positions (k + u0) / Np against the weight CDF.
/// With equal weights every particle is returned exactly once.
inline std::vector<int> systematic_resample(const Eigen::VectorXd& log_weights, double u0) {
    const int np = static_cast<int>(log_weights.size());
    std::vector<double> cdf(np);
    double acc = 0.0;
    for (int i = 0; i < np; ++i) {
        acc += std::exp(log_weights(i));
        cdf[i] = acc;
    }
    std::vector<int> idx(np);
    int j = 0;
    for (int k = 0; k < np; ++k) {
        const double pos = (k + u0) / np * acc;
        while (j < np - 1 && cdf[j] < pos) ++j;
        idx[k] = j;
    }
    return idx;
}

struct ParticleOptions {
    int n_particles = 500;
    int likelihood_order = 80;  // quadrature order for the exact weights
    std::uint64_t seed = 0;
};

inline ParticleRun particle_filter(const WienerModel& model, const PiecewiseNonlinearity& nl,
                                   const std::vector<double>& measurements,
                                   const std::vector<Eigen::VectorXd>& inputs,
                                   const ParticleOptions& opts) {
    if (opts.n_particles < 2) throw Error("particle_filter: need at least 2 particles");
    const int horizon = static_cast<int>(measurements.size());
    const Eigen::Index n = model.state_dim();
    const int np = opts.n_particles;

    RandomStream init_stream(opts.seed, stream::kParticleInit);
    RandomStream prop_stream(opts.seed, stream::kParticleProp);
    RandomStream resample_stream(opts.seed, stream::kResample);

    const Eigen::MatrixXd l1 = cholesky_factor_psd(model.P1);
    const Eigen::MatrixXd lq = cholesky_factor_psd(model.Q);

    ParticleRun run;
    run.seed = opts.seed;
    run.ensembles.resize(horizon);
    run.means.resize(horizon);

    Eigen::MatrixXd x(n, np);
    for (int i = 0; i < np; ++i) {
        x.col(i) = model.mu1 + l1 * normal_vector(init_stream, static_cast<std::uint64_t>(i), n);
    }

    for (int t = 1; t <= horizon; ++t) {
        const LikelihoodMixture lik =
            likelihood_mixture(model, nl, measurements[t - 1], opts.likelihood_order,
                               opts.likelihood_order);
        const double du = model.D.dot(inputs[t - 1]);
        Eigen::VectorXd lw(np);
        for (int i = 0; i < np; ++i) {
            lw(i) = log_likelihood_at(lik, model.C.dot(x.col(i)) + du, model.R);
        }
        const double z = log_sum_exp(std::vector<double>(lw.data(), lw.data() + np));
        if (!std::isfinite(z))
            throw ParticleDegeneracyError("particle degeneracy at t=" + std::to_string(t));
        lw.array() -= z;

        ParticleEnsemble& ens = run.ensembles[t - 1];
        ens.particles = x;
        ens.log_weights = lw;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < np; ++i) mean += std::exp(lw(i)) * x.col(i);
        run.means[t - 1] = mean;

        const auto idx =
            systematic_resample(lw, resample_stream.uniform(static_cast<std::uint64_t>(t), 0));
        Eigen::MatrixXd xr(n, np);
        for (int k = 0; k < np; ++k) xr.col(k) = x.col(idx[k]);
        ens.resampled = xr;

        if (t < horizon) {
            const Eigen::VectorXd shift = model.B * inputs[t - 1];
            for (int i = 0; i < np; ++i) {
                Eigen::VectorXd noise(n);
                for (Eigen::Index c = 0; c < n; ++c) {
                    noise(c) = prop_stream.normal(static_cast<std::uint64_t>(t),
                                                  static_cast<std::uint64_t>(i) * n + c);
                }
                x.col(i) = model.A * xr.col(i) + shift + lq * noise;
            }
        }
    }
    return run;
}

struct ParticleSmootherRun {
    std::vector<Eigen::MatrixXd> ensembles;  // n x Ns equal-weight samples per t
    std::vector<Eigen::VectorXd> means;
};

/// Backward-simulation smoother over the stored forward ensembles, with
/// rejection sampling against the transition density (exact fallback scan
/// after 256 draws). Deterministic given the seed.
inline ParticleSmootherRun particle_smoother(const ParticleRun& pf, const WienerModel& model,
                                             const std::vector<Eigen::VectorXd>& inputs,
                                             int n_trajectories, std::uint64_t seed) {
    const int horizon = static_cast<int>(pf.ensembles.size());
    const Eigen::Index n = model.state_dim();
    const int np = static_cast<int>(pf.ensembles.front().log_weights.size());
    const int ns = n_trajectories;
    RandomStream bs(seed, stream::kBackwardSim);

    const Eigen::MatrixXd lq = cholesky_lower(model.Q);
    const double log_sup = -0.5 * n * kLogTwoPi - 0.5 * log_det_from_cholesky(lq);

    ParticleSmootherRun run;
    run.ensembles.assign(horizon, Eigen::MatrixXd(n, ns));
    run.means.assign(horizon, Eigen::VectorXd::Zero(n));

    // Weight CDFs per step for categorical proposals.
    std::vector<std::vector<double>> cdf(horizon, std::vector<double>(np));
    for (int t = 0; t < horizon; ++t) {
        double acc = 0.0;
        for (int i = 0; i < np; ++i) {
            acc += std::exp(pf.ensembles[t].log_weights(i));
            cdf[t][i] = acc;
        }
    }
    const auto draw_categorical = [&](int t, double u) {
        const double pos = u * cdf[t].back();
        return static_cast<int>(std::lower_bound(cdf[t].begin(), cdf[t].end(), pos) -
                                cdf[t].begin());
    };

    std::vector<int> current(ns);
    for (int j = 0; j < ns; ++j) {
        current[j] = draw_categorical(horizon - 1,
                                      bs.uniform(static_cast<std::uint64_t>(horizon) << 32,
                                                 static_cast<std::uint64_t>(j)));
        run.ensembles[horizon - 1].col(j) = pf.ensembles[horizon - 1].particles.col(current[j]);
    }

    for (int t = horizon - 1; t >= 1; --t) {
        const auto& ens = pf.ensembles[t - 1];
        const Eigen::VectorXd shift = model.B * inputs[t - 1];
        Eigen::MatrixXd propagated(n, np);  // A x_t^i + B u_t
        for (int i = 0; i < np; ++i) propagated.col(i) = model.A * ens.particles.col(i) + shift;

        for (int j = 0; j < ns; ++j) {
            const Eigen::VectorXd target = run.ensembles[t].col(j);
            int chosen = -1;
            for (int attempt = 0; attempt < 256; ++attempt) {
                const std::uint64_t hi =
                    (static_cast<std::uint64_t>(t) << 32) | static_cast<std::uint64_t>(attempt);
                const int cand = draw_categorical(t - 1, bs.uniform(hi, 2 * j));
                const Eigen::VectorXd w = lq.triangularView<Eigen::Lower>().solve(
                    (target - propagated.col(cand)).eval());
                const double log_ratio = -0.5 * w.squaredNorm();  // log N - log sup
                if (std::log(bs.uniform(hi, 2 * j + 1)) <= log_ratio) {
                    chosen = cand;
                    break;
                }
            }
            if (chosen < 0) {
                // Exact scan fallback.
                std::vector<double> lp(np);
                for (int i = 0; i < np; ++i) {
                    const Eigen::VectorXd w = lq.triangularView<Eigen::Lower>().solve(
                        (target - propagated.col(i)).eval());
                    lp[i] = ens.log_weights(i) + log_sup - 0.5 * w.squaredNorm();
                }
                const double z = log_sum_exp(lp);
                if (!std::isfinite(z))
                    throw ParticleDegeneracyError("particle smoother degeneracy at t=" +
                                                  std::to_string(t));
                double acc = 0.0;
                const double u = bs.uniform((static_cast<std::uint64_t>(t) << 32) | 0xFFFFull,
                                            static_cast<std::uint64_t>(j));
                chosen = np - 1;
                for (int i = 0; i < np; ++i) {
                    acc += std::exp(lp[i] - z);
                    if (u <= acc) {
                        chosen = i;
                        break;
                    }
                }
            }
            run.ensembles[t - 1].col(j) = ens.particles.col(chosen);
        }
    }
    for (int t = 0; t < horizon; ++t) {
        run.means[t] = run.ensembles[t].rowwise().mean();
    }
    return run;
}

} // namespace qgs

#endif // QGS_BASELINES_HPP
