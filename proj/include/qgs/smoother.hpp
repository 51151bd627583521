#ifndef QGS_SMOOTHER_HPP
#define QGS_SMOOTHER_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "qgs/backward.hpp"
#include "qgs/error.hpp"
#include "qgs/filter.hpp"
#include "qgs/gaussian.hpp"
#include "qgs/model.hpp"

namespace qgs {

/// Marginal smoothing posterior p(x_t | y_{1:N}).
struct SmoothedState {
    int t = 0;
    GaussianMixture posterior;
};

/// Joint posterior p(x_{t+1}, x_t | y_{1:N}) over the stacked 2n vector.
struct JointSmoothedState {
    int t = 0;
    GaussianMixture posterior;
};

/// Two-filter combination at time t: condition every prediction component on
/// the stacked pseudo-measurements of every backward component. Weights are
/// delta * eps * evidence, normalized. Components are ordered backward-major.
inline SmoothedState smooth_at(int t, const GaussianMixture& predicted,
                               const BackwardState& backward,
                               const std::vector<Eigen::VectorXd>& inputs) {
    if (backward.t != t) throw Error("smooth_at: backward state at wrong time");
    const Eigen::VectorXd offset = backward_offset(backward, inputs);
    SmoothedState out;
    out.t = t;
    out.posterior.components.reserve(predicted.size() * backward.size());
    for (std::size_t l = 0; l < backward.size(); ++l) {
        const auto& bc = backward.components[l];
        for (std::size_t tau = 0; tau < predicted.size(); ++tau) {
            const auto& pc = predicted.components[tau];
            try {
                const ConditionResult res = condition_on_linear_observation(
                    pc.gaussian, backward.O, offset, *bc.P, bc.zeta_stack);
                out.posterior.add(pc.log_weight + bc.log_eps + res.log_evidence, res.posterior);
            } catch (const DegenerateInnovationError&) {
                throw DegenerateInnovationError("smooth_at t=" + std::to_string(t) +
                                                ": degenerate stack covariance at (tau=" +
                                                std::to_string(tau) + ", l=" + std::to_string(l) +
                                                ")");
            }
        }
    }
    out.posterior.normalize();
    return out;
}

/// Joint combination at time t (Theorem 5): pairs component tau of the
/// filtered mixture with component k = l*M + tau of the (unreduced) smoothed
/// mixture at t+1, through the retrodiction gain
/// K = Sigma_f A^T (Q + A Sigma_f A^T)^{-1}.
inline JointSmoothedState joint_smooth_at(int t, const GaussianMixture& filtered,
                                          const GaussianMixture& smoothed_next,
                                          const WienerModel& model, const Eigen::VectorXd& u) {
    const std::size_t m_count = filtered.size();
    if (m_count == 0 || smoothed_next.size() % m_count != 0)
        throw Error("joint_smooth_at: component counts are not cross-product aligned");
    const Eigen::Index n = model.state_dim();
    const Eigen::VectorXd shift = model.B * u;

    // Per-tau prediction moments and gains.
    std::vector<Eigen::VectorXd> pred_mean(m_count);
    std::vector<Eigen::MatrixXd> pred_cov(m_count), gain(m_count);
    for (std::size_t tau = 0; tau < m_count; ++tau) {
        const auto& fc = filtered.components[tau].gaussian;
        pred_mean[tau] = model.A * fc.mean + shift;
        pred_cov[tau] = symmetrize(model.Q + model.A * fc.cov * model.A.transpose());
        Eigen::MatrixXd lp;
        try {
            lp = cholesky_lower(pred_cov[tau]);
        } catch (const DegenerateCovarianceError&) {
            throw DegenerateInnovationError("joint_smooth_at t=" + std::to_string(t) +
                                            ": singular predicted covariance");
        }
        // K = Sigma_f A^T P_pred^{-1}
        const Eigen::MatrixXd rhs = lp.triangularView<Eigen::Lower>().solve(
            (model.A * fc.cov).eval());
        gain[tau] = lp.transpose().triangularView<Eigen::Upper>().solve(rhs).transpose();
    }

    JointSmoothedState out;
    out.t = t;
    out.posterior.components.reserve(smoothed_next.size());
    for (std::size_t k = 0; k < smoothed_next.size(); ++k) {
        const std::size_t tau = k % m_count;
        const auto& sn = smoothed_next.components[k];
        const auto& fc = filtered.components[tau].gaussian;
        Gaussian g;
        g.mean.resize(2 * n);
        g.mean.head(n) = sn.gaussian.mean;
        g.mean.tail(n) = fc.mean + gain[tau] * (sn.gaussian.mean - pred_mean[tau]);
        g.cov.resize(2 * n, 2 * n);
        const Eigen::MatrixXd cross = sn.gaussian.cov * gain[tau].transpose();
        g.cov.topLeftCorner(n, n) = sn.gaussian.cov;
        g.cov.topRightCorner(n, n) = cross;
        g.cov.bottomLeftCorner(n, n) = cross.transpose();
        g.cov.bottomRightCorner(n, n) = symmetrize(
            fc.cov + gain[tau] * (sn.gaussian.cov - pred_cov[tau]) * gain[tau].transpose());
        out.posterior.add(sn.log_weight, std::move(g));
    }
    out.posterior.normalized = smoothed_next.normalized;
    return out;
}

/// Marginal of the top (x_{t+1}) block of a joint posterior, component-wise.
inline GaussianMixture joint_marginal_next(const JointSmoothedState& joint, Eigen::Index n) {
    GaussianMixture out;
    out.components.reserve(joint.posterior.size());
    for (const auto& c : joint.posterior.components) {
        out.add(c.log_weight,
                Gaussian(c.gaussian.mean.head(n), c.gaussian.cov.topLeftCorner(n, n)));
    }
    out.normalized = joint.posterior.normalized;
    return out;
}

/// The final measurement update re-assembled in Theorem-4 component order
/// (likelihood-major, prediction-minor), used as the endpoint smoothed
/// mixture consumed by the joint combination at t = N-1.
inline GaussianMixture endpoint_smoothed(const GaussianMixture& predicted_n,
                                         const LikelihoodMixture& lik, const WienerModel& model,
                                         const Eigen::VectorXd& u_n) {
    const Eigen::VectorXd offset = Eigen::VectorXd::Constant(1, model.D.dot(u_n));
    const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(1, 1, model.R);
    GaussianMixture out;
    out.components.reserve(predicted_n.size() * lik.size());
    for (const auto& lc : lik.components) {
        const Eigen::VectorXd zeta = Eigen::VectorXd::Constant(1, lc.pseudo_measurement);
        for (const auto& pc : predicted_n.components) {
            const ConditionResult res =
                condition_on_linear_observation(pc.gaussian, model.C, offset, noise, zeta);
            out.add(lc.log_weight + pc.log_weight + res.log_evidence, res.posterior);
        }
    }
    out.normalize();
    return out;
}

struct SmootherRun {
    std::vector<SmoothedState> smoothed;           // reduced, one per t = 1..N
    std::vector<JointSmoothedState> joint;         // p(x_{t+1}, x_t | y_{1:N}), t = 1..N
    std::vector<GaussianMixture> smoothed_unreduced;  // pre-reduction marginals
};

/// Combine stored forward and backward passes into marginal and joint
/// smoothing posteriors. The marginal at t = N is the filter's final
/// filtered mixture, copied verbatim.
inline SmootherRun run_smoother(const FilterRun& filter, const BackwardRun& backward,
                                const WienerModel& model, const PiecewiseNonlinearity& nl,
                                const std::vector<double>& measurements,
                                const std::vector<Eigen::VectorXd>& inputs,
                                const FilterOptions& opts = {}, bool reduce_joint = false) {
    const int horizon = static_cast<int>(measurements.size());
    if (static_cast<int>(filter.states.size()) != horizon ||
        static_cast<int>(backward.post.size()) != horizon)
        throw Error("run_smoother: forward and backward runs must cover the same data");

    SmootherRun run;
    run.smoothed.resize(horizon);
    run.joint.resize(horizon);
    run.smoothed_unreduced.resize(horizon);

    const GaussianMixture& final_filtered = filter.states[horizon - 1].filtered;
    run.smoothed[horizon - 1] = {horizon, final_filtered};
    run.smoothed_unreduced[horizon - 1] = final_filtered;

    // Joint at t = N: p(x_{N+1}, x_N | y_{1:N}) pairs the final filtered
    // mixture with its own one-step prediction.
    run.joint[horizon - 1] = joint_smooth_at(
        horizon, final_filtered, time_update(final_filtered, model, inputs[horizon - 1]), model,
        inputs[horizon - 1]);

    // The endpoint mixture consumed by the joint at N-1 keeps Theorem-4
    // component order and is not reduced.
    GaussianMixture next_unreduced =
        horizon > 1 ? endpoint_smoothed(filter.states[horizon - 1].predicted,
                                        opts.likelihood(model, nl, measurements[horizon - 1]),
                                        model, inputs[horizon - 1])
                    : GaussianMixture{};

    for (int t = horizon - 1; t >= 1; --t) {
        SmoothedState sm =
            smooth_at(t, filter.states[t - 1].predicted, backward.post[t - 1], inputs);
        run.joint[t - 1] = joint_smooth_at(t, filter.states[t - 1].filtered, next_unreduced,
                                           model, inputs[t - 1]);
        if (reduce_joint) {
            run.joint[t - 1].posterior =
                reduce_filtered(std::move(run.joint[t - 1].posterior), opts);
        }
        run.smoothed_unreduced[t - 1] = sm.posterior;
        next_unreduced = std::move(sm.posterior);
        SmoothedState reduced;
        reduced.t = t;
        reduced.posterior = reduce_filtered(run.smoothed_unreduced[t - 1], opts);
        run.smoothed[t - 1] = std::move(reduced);
    }
    if (reduce_joint) {
        run.joint[horizon - 1].posterior =
            reduce_filtered(std::move(run.joint[horizon - 1].posterior), opts);
    }
    return run;
}

/// Smoothed mean/covariance estimates per step.
inline std::vector<Gaussian> smoothed_estimates(const SmootherRun& run) {
    std::vector<Gaussian> out;
    out.reserve(run.smoothed.size());
    for (const auto& s : run.smoothed) out.push_back(mixture_moments(s.posterior));
    return out;
}

} // namespace qgs

#endif // QGS_SMOOTHER_HPP
