#ifndef QGS_FILTER_HPP
#define QGS_FILTER_HPP

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/gaussian.hpp"
#include "qgs/likelihood.hpp"
#include "qgs/model.hpp"

namespace qgs {

/// Settings shared by the forward and backward Gaussian sum passes.
struct FilterOptions {
    int order1 = 10;          // L1, branch quadrature order
    int order2 = -1;          // L2, quantization order; -1 means "same as L1"
    int max_components = 10;  // mixture cap after each measurement update
    double prune_log_weight = -46.0;  // ~1e-20 relative mass
    bool force_single_component_likelihood = false;  // K = 1, zeta = y
    bool keep_diagnostics = false;
    std::size_t precluster_threshold = 3000;  // coarse pass before exact joining

    int l2() const { return order2 > 0 ? order2 : order1; }

    LikelihoodMixture likelihood(const WienerModel& model, const PiecewiseNonlinearity& nl,
                                 double y) const {
        if (force_single_component_likelihood) return single_component_likelihood(y);
        return likelihood_mixture(model, nl, y, order1, l2());
    }
};

/// Per-step filter output: prediction p(x_t | y_{1:t-1}), the (reduced)
/// filtered mixture p(x_t | y_{1:t}) and the evidence increment.
struct FilterState {
    int t = 0;
    GaussianMixture predicted;
    GaussianMixture filtered;
    double log_evidence_increment = 0.0;
};

struct UpdateDiagnostics {
    std::vector<Eigen::MatrixXd> gains;     // one per predicted component
    std::vector<double> raw_log_weights;    // unnormalized, K * M entries
    int dropped_components = 0;
};

/// Measurement update: the (kappa, ell) cross product of linear-Gaussian
/// conditioning steps against the pseudo-measurements, with component weight
/// log phi + log delta + log evidence. Returns the normalized filtered
/// mixture and log p(y_t | y_{1:t-1}).
inline std::pair<GaussianMixture, double> measurement_update(const GaussianMixture& predicted,
                                                             const LikelihoodMixture& lik,
                                                             const WienerModel& model,
                                                             const Eigen::VectorXd& u,
                                                             UpdateDiagnostics* diag = nullptr) {
    if (lik.empty()) {
        throw NoLikelihoodSupportError(
            "no likelihood support: measurement inconsistent with every branch image");
    }
    const Eigen::VectorXd offset = Eigen::VectorXd::Constant(1, model.D.dot(u));
    const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(1, 1, model.R);
    GaussianMixture filtered;
    filtered.components.reserve(predicted.size() * lik.size());
    for (const auto& prior : predicted.components) {
        if (diag) {
            const Eigen::MatrixXd cq = model.C * prior.gaussian.cov;
            const double s = model.R + (cq * model.C.transpose())(0, 0);
            diag->gains.push_back(cq.transpose() / s);
        }
        for (const auto& comp : lik.components) {
            const Eigen::VectorXd zeta = Eigen::VectorXd::Constant(1, comp.pseudo_measurement);
            const ConditionResult res =
                condition_on_linear_observation(prior.gaussian, model.C, offset, noise, zeta);
            const double raw = comp.log_weight + prior.log_weight + res.log_evidence;
            filtered.add(raw, res.posterior);
            if (diag) diag->raw_log_weights.push_back(raw);
        }
    }
    const double log_evidence = filtered.normalize();
    return {std::move(filtered), log_evidence};
}

/// Time update: push every component through the linear dynamics; weights
/// are unchanged.
inline GaussianMixture time_update(const GaussianMixture& filtered, const WienerModel& model,
                                   const Eigen::VectorXd& u) {
    GaussianMixture predicted;
    predicted.components.reserve(filtered.size());
    const Eigen::VectorXd shift = model.B * u;
    for (const auto& c : filtered.components) {
        Gaussian g;
        g.mean = model.A * c.gaussian.mean + shift;
        g.cov = symmetrize(model.Q + model.A * c.gaussian.cov * model.A.transpose());
        predicted.add(c.log_weight, std::move(g));
    }
    predicted.normalized = filtered.normalized;
    return predicted;
}

/// Prune negligible components, then join down to the configured cap.
inline GaussianMixture reduce_filtered(GaussianMixture mix, const FilterOptions& opts,
                                       int* dropped = nullptr) {
    const int d = prune_by_relative_weight(mix, opts.prune_log_weight);
    if (dropped) *dropped += d;
    if (mix.size() > opts.precluster_threshold) {
        mix = precluster_by_distance(std::move(mix), opts.precluster_threshold);
    }
    mix = reduce_by_joining(std::move(mix), opts.max_components);
    mix.normalize();
    return mix;
}

struct FilterRun {
    std::vector<FilterState> states;  // one per t = 1..N
    double total_log_evidence = 0.0;
    std::vector<UpdateDiagnostics> diagnostics;  // filled when requested
};

/// Full forward recursion: likelihood -> measurement update -> reduction ->
/// time update, initialized from the model prior.
inline FilterRun run_filter(const WienerModel& model, const PiecewiseNonlinearity& nl,
                            const std::vector<double>& measurements,
                            const std::vector<Eigen::VectorXd>& inputs,
                            const FilterOptions& opts = {}) {
    if (measurements.empty() || measurements.size() != inputs.size())
        throw Error("run_filter: measurement and input sequences must have equal length >= 1");
    const int horizon = static_cast<int>(measurements.size());

    FilterRun run;
    run.states.reserve(horizon);
    GaussianMixture predicted;
    predicted.add(0.0, Gaussian(model.mu1, model.P1));
    predicted.normalized = true;

    for (int t = 1; t <= horizon; ++t) {
        try {
            const LikelihoodMixture lik = opts.likelihood(model, nl, measurements[t - 1]);
            UpdateDiagnostics diag;
            auto [filtered, log_ev] = measurement_update(predicted, lik, model, inputs[t - 1],
                                                         opts.keep_diagnostics ? &diag : nullptr);
            filtered = reduce_filtered(std::move(filtered), opts, &diag.dropped_components);

            FilterState state;
            state.t = t;
            state.predicted = predicted;
            state.filtered = filtered;
            state.log_evidence_increment = log_ev;
            run.states.push_back(std::move(state));
            run.total_log_evidence += log_ev;
            if (opts.keep_diagnostics) run.diagnostics.push_back(std::move(diag));

            if (t < horizon) predicted = time_update(run.states.back().filtered, model, inputs[t - 1]);
        } catch (const Error& e) {
            throw Error("t=" + std::to_string(t) + ": " + e.what());
        }
    }
    return run;
}

/// Filtered mean/covariance estimates per step (mixture moments).
inline std::vector<Gaussian> filtered_estimates(const FilterRun& run) {
    std::vector<Gaussian> out;
    out.reserve(run.states.size());
    for (const auto& s : run.states) out.push_back(mixture_moments(s.filtered));
    return out;
}

} // namespace qgs

#endif // QGS_FILTER_HPP
