#ifndef QGS_BACKWARD_HPP
#define QGS_BACKWARD_HPP

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/filter.hpp"
#include "qgs/gaussian.hpp"
#include "qgs/likelihood.hpp"
#include "qgs/model.hpp"

namespace qgs {

/// One term of p(y_{t:N} | x_t) = sum_k exp(eps_k) N(zeta_k; O x + H u, P_k).
/// The covariance is held by pointer: before the first reduction every
/// component shares one block, afterwards each carries its own.
struct BackwardComponent {
    double log_eps = 0.0;
    Eigen::VectorXd zeta_stack;
    std::shared_ptr<const Eigen::MatrixXd> P;
};

/// Backward state at time t. O and H are common to all components (the
/// recursion transforms them identically); H's columns act on the input
/// stack u_t, u_{t+1}, ... starting at the state's own time.
struct BackwardState {
    int t = 0;
    bool reduced = false;
    Eigen::MatrixXd O;  // stack_rows x n
    Eigen::MatrixXd H;  // stack_rows x (m * tracked steps); may have 0 columns
    std::vector<BackwardComponent> components;

    std::size_t size() const { return components.size(); }
    Eigen::Index stack_rows() const { return O.rows(); }
};

/// H times the input stack starting at the state's time (1-based indexing
/// into `inputs`).
inline Eigen::VectorXd backward_offset(const BackwardState& state,
                                       const std::vector<Eigen::VectorXd>& inputs) {
    if (state.H.cols() == 0) return Eigen::VectorXd::Zero(state.stack_rows());
    const Eigen::Index m = inputs.front().size();
    const Eigen::Index steps = state.H.cols() / m;
    Eigen::VectorXd stack(state.H.cols());
    for (Eigen::Index k = 0; k < steps; ++k) {
        const std::size_t idx = static_cast<std::size_t>(state.t - 1 + k);
        stack.segment(k * m, m) =
            idx < inputs.size() ? inputs[idx] : Eigen::VectorXd::Zero(m);
    }
    return state.H * stack;
}

/// t = N initialization: one component per surviving likelihood component,
/// with O = C, H = D and P = R.
inline BackwardState backward_init(const WienerModel& model, const LikelihoodMixture& lik,
                                   int horizon) {
    if (lik.empty()) throw NoLikelihoodSupportError("no likelihood support at t=N");
    BackwardState state;
    state.t = horizon;
    state.O = model.C;
    state.H = model.D;
    auto shared_p = std::make_shared<const Eigen::MatrixXd>(
        Eigen::MatrixXd::Constant(1, 1, model.R));
    state.components.reserve(lik.size());
    for (const auto& c : lik.components) {
        state.components.push_back(
            {c.log_weight, Eigen::VectorXd::Constant(1, c.pseudo_measurement), shared_p});
    }
    return state;
}

/// Backward prediction from t+1 to t: O <- O A, H gains an O B block on the
/// left, P <- P + O Q O^T. Weights and pseudo-measurement stacks are kept.
inline BackwardState backward_predict(const BackwardState& next, const WienerModel& model) {
    BackwardState state;
    state.t = next.t - 1;
    state.reduced = false;
    state.O = next.O * model.A;
    state.H.resize(next.O.rows(), model.B.cols() + next.H.cols());
    state.H.leftCols(model.B.cols()) = next.O * model.B;
    if (next.H.cols() > 0) state.H.rightCols(next.H.cols()) = next.H;
    state.components.reserve(next.size());

    const Eigen::MatrixXd oqo = symmetrize(next.O * model.Q * next.O.transpose());
    const Eigen::MatrixXd* cached_in = nullptr;
    std::shared_ptr<const Eigen::MatrixXd> cached_out;
    for (const auto& c : next.components) {
        if (c.P.get() != cached_in) {
            cached_in = c.P.get();
            cached_out = std::make_shared<const Eigen::MatrixXd>(symmetrize(*c.P + oqo));
        }
        state.components.push_back({c.log_eps, c.zeta_stack, cached_out});
    }
    return state;
}

/// Backward measurement update at time t: the (k, tau) cross product stacks
/// zeta_t on top, prepends C to O and [D 0] to H, and block-extends P with R.
inline BackwardState backward_update(const BackwardState& predicted,
                                     const LikelihoodMixture& lik, const WienerModel& model) {
    if (lik.empty())
        throw NoLikelihoodSupportError("no likelihood support at t=" +
                                       std::to_string(predicted.t));
    const Eigen::Index rows = predicted.stack_rows();
    BackwardState state;
    state.t = predicted.t;
    state.O.resize(rows + 1, predicted.O.cols());
    state.O.row(0) = model.C;
    state.O.bottomRows(rows) = predicted.O;
    state.H = Eigen::MatrixXd::Zero(rows + 1, std::max<Eigen::Index>(predicted.H.cols(),
                                                                     model.D.cols()));
    state.H.row(0).head(model.D.cols()) = model.D;
    if (predicted.H.cols() > 0) state.H.bottomRows(rows).leftCols(predicted.H.cols()) = predicted.H;

    state.components.reserve(predicted.size() * lik.size());
    const Eigen::MatrixXd* cached_in = nullptr;
    std::shared_ptr<const Eigen::MatrixXd> cached_out;
    for (const auto& comp : predicted.components) {
        if (comp.P.get() != cached_in) {
            cached_in = comp.P.get();
            Eigen::MatrixXd p = Eigen::MatrixXd::Zero(rows + 1, rows + 1);
            p(0, 0) = model.R;
            p.bottomRightCorner(rows, rows) = *comp.P;
            cached_out = std::make_shared<const Eigen::MatrixXd>(std::move(p));
        }
        for (const auto& lc : lik.components) {
            Eigen::VectorXd zeta(rows + 1);
            zeta(0) = lc.pseudo_measurement;
            zeta.tail(rows) = comp.zeta_stack;
            state.components.push_back(
                {lc.log_weight + comp.log_eps, std::move(zeta), cached_out});
        }
    }
    return state;
}

/// Convert every component to its Gaussian-in-x form (absorbing the
/// conversion constant into the weight), join down to `max_components`, and
/// re-express with O = I, H empty, P = U, zeta = z. Returns nothing when the
/// observation stack is still rank deficient (caller retries later).
inline std::optional<BackwardState> backward_reduce(const BackwardState& state,
                                                    const std::vector<Eigen::VectorXd>& inputs,
                                                    const FilterOptions& opts,
                                                    int* dropped = nullptr) {
    const Eigen::Index n = state.O.cols();
    if (state.stack_rows() < n) return std::nullopt;
    if (state.components.empty()) throw Error("backward_reduce: empty state");
    {
        // Shared rank gate: all components see the same O; use the first
        // component's noise block for the conditioning estimate.
        const Eigen::MatrixXd lp = cholesky_lower(*state.components.front().P);
        const Eigen::MatrixXd wo = lp.triangularView<Eigen::Lower>().solve(state.O);
        if (spd_condition_number(symmetrize(wo.transpose() * wo)) >= 1e12) return std::nullopt;
    }
    const Eigen::VectorXd offset = backward_offset(state, inputs);

    GaussianMixture mix;
    mix.components.reserve(state.size());
    double max_eps = kNegInf;
    for (const auto& c : state.components) max_eps = std::max(max_eps, c.log_eps);
    for (const auto& c : state.components) {
        if (c.log_eps <= -690.0 || c.log_eps < max_eps + opts.prune_log_weight) {
            if (dropped) ++*dropped;
            continue;  // weight floor: contributes nothing representable
        }
        const BackwardFormResult res =
            backward_form_to_gaussian(state.O, offset, *c.P, c.zeta_stack);
        mix.add(c.log_eps + res.log_alpha, res.gaussian);
    }
    if (mix.empty()) throw Error("backward_reduce: all components floored");
    if (mix.size() > opts.precluster_threshold) {
        mix = precluster_by_distance(std::move(mix), opts.precluster_threshold);
    }
    mix = reduce_by_joining(std::move(mix), opts.max_components);

    BackwardState out;
    out.t = state.t;
    out.reduced = true;
    out.O = Eigen::MatrixXd::Identity(n, n);
    out.H = Eigen::MatrixXd::Zero(n, 0);
    out.components.reserve(mix.size());
    for (auto& wg : mix.components) {
        out.components.push_back(
            {wg.log_weight, std::move(wg.gaussian.mean),
             std::make_shared<const Eigen::MatrixXd>(std::move(wg.gaussian.cov))});
    }
    return out;
}

struct BackwardRun {
    // post[t-1]: p(y_{t:N} | x_t) after the measurement stage (and reduction,
    // when it fired). pre[t-1]: p(y_{t+1:N} | x_t), defined for t < N.
    std::vector<BackwardState> post;
    std::vector<BackwardState> pre;
    std::vector<int> counts_after_update;  // S_{t|t} before reduction
    int dropped_components = 0;
};

/// Full backward recursion of the two-filter smoother.
inline BackwardRun run_backward(const WienerModel& model, const PiecewiseNonlinearity& nl,
                                const std::vector<double>& measurements,
                                const std::vector<Eigen::VectorXd>& inputs,
                                const FilterOptions& opts = {}) {
    if (measurements.empty() || measurements.size() != inputs.size())
        throw Error("run_backward: measurement and input sequences must have equal length >= 1");
    const int horizon = static_cast<int>(measurements.size());

    BackwardRun run;
    run.post.resize(horizon);
    run.pre.resize(horizon > 1 ? horizon - 1 : 0);
    run.counts_after_update.assign(horizon, 0);

    const auto maybe_reduce = [&](BackwardState&& s) -> BackwardState {
        run.counts_after_update[s.t - 1] = static_cast<int>(s.size());
        if (static_cast<int>(s.size()) <= opts.max_components) return std::move(s);
        auto reduced = backward_reduce(s, inputs, opts, &run.dropped_components);
        return reduced ? std::move(*reduced) : std::move(s);
    };

    try {
        BackwardState state = maybe_reduce(
            backward_init(model, opts.likelihood(model, nl, measurements[horizon - 1]), horizon));
        run.post[horizon - 1] = state;
        for (int t = horizon - 1; t >= 1; --t) {
            BackwardState pre = backward_predict(state, model);
            run.pre[t - 1] = pre;
            const LikelihoodMixture lik = opts.likelihood(model, nl, measurements[t - 1]);
            state = maybe_reduce(backward_update(pre, lik, model));
            run.post[t - 1] = state;
        }
    } catch (const Error& e) {
        throw Error(std::string("run_backward: ") + e.what());
    }
    return run;
}

} // namespace qgs

#endif // QGS_BACKWARD_HPP
