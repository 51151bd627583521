#ifndef QGS_GAUSSIAN_HPP
#define QGS_GAUSSIAN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/numeric.hpp"

namespace qgs {

/// Multivariate normal in moment form.
struct Gaussian {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Gaussian() = default;
    Gaussian(Eigen::VectorXd m, Eigen::MatrixXd c) : mean(std::move(m)), cov(std::move(c)) {}

    static Gaussian scalar(double m, double var) {
        return Gaussian(Eigen::VectorXd::Constant(1, m), Eigen::MatrixXd::Constant(1, 1, var));
    }

    Eigen::Index dim() const { return mean.size(); }
};

struct WeightedGaussian {
    double log_weight = 0.0;
    Gaussian gaussian;
};

/// Ordered list of weighted Gaussians. Weights live in the log domain; a
/// mixture is `normalized` once the weights have been scaled to sum to one.
struct GaussianMixture {
    std::vector<WeightedGaussian> components;
    bool normalized = false;

    std::size_t size() const { return components.size(); }
    bool empty() const { return components.empty(); }

    void add(double log_weight, Gaussian g) {
        components.push_back({log_weight, std::move(g)});
        normalized = false;
    }

    /// log of the total (unnormalized) weight.
    double log_total_weight() const {
        std::vector<double> lw(components.size());
        for (std::size_t i = 0; i < components.size(); ++i) lw[i] = components[i].log_weight;
        return log_sum_exp(lw);
    }

    /// Scale weights so they sum to one; returns the log normalizer that was
    /// removed (log of the previous total weight).
    double normalize() {
        const double z = log_total_weight();
        if (!std::isfinite(z)) throw Error("cannot normalize mixture with zero total weight");
        for (auto& c : components) c.log_weight -= z;
        normalized = true;
        return z;
    }
};

/// log N(x; mu, Sigma) via Cholesky; throws DegenerateCovarianceError with the
/// failing pivot when Sigma is not positive definite.
inline double log_gauss_eval(const Eigen::VectorXd& x, const Gaussian& g) {
    if (x.size() != g.dim()) throw DimensionError("log_gauss_eval: dimension mismatch");
    const Eigen::MatrixXd l = cholesky_lower(g.cov);
    return log_gauss_with_cholesky(x, g.mean, l);
}

/// Density of a mixture at a point (sum of weighted component densities).
inline double mixture_log_density(const GaussianMixture& m, const Eigen::VectorXd& x) {
    std::vector<double> terms;
    terms.reserve(m.size());
    for (const auto& c : m.components) terms.push_back(c.log_weight + log_gauss_eval(x, c.gaussian));
    return log_sum_exp(terms);
}

struct ConditionResult {
    Gaussian posterior;
    double log_evidence = 0.0;
};

/// Condition N(x; psi, Q) on the observation y = C x + offset + e,
/// e ~ N(0, R). Returns the posterior over x and log N(y; C psi + offset,
/// R + C Q C^T). The posterior covariance is (I - K C) Q, symmetrized.
inline ConditionResult condition_on_linear_observation(const Gaussian& prior,
                                                       const Eigen::MatrixXd& obs_matrix,
                                                       const Eigen::VectorXd& offset,
                                                       const Eigen::MatrixXd& obs_noise,
                                                       const Eigen::VectorXd& y) {
    const Eigen::Index n = prior.dim();
    const Eigen::Index p = obs_matrix.rows();
    if (obs_matrix.cols() != n || offset.size() != p || obs_noise.rows() != p ||
        obs_noise.cols() != p || y.size() != p) {
        throw DimensionError("condition_on_linear_observation: dimension mismatch");
    }
    const Eigen::MatrixXd cq = obs_matrix * prior.cov;                       // C Q
    const Eigen::MatrixXd s = symmetrize(obs_noise + cq * obs_matrix.transpose());
    Eigen::MatrixXd ls;
    try {
        ls = cholesky_lower(s);
    } catch (const DegenerateCovarianceError&) {
        throw DegenerateInnovationError("degenerate innovation");
    }
    // K = Q C^T S^{-1}, via two triangular solves against the factor of S.
    const Eigen::MatrixXd tmp = ls.triangularView<Eigen::Lower>().solve(cq);  // L^{-1} C Q
    const Eigen::MatrixXd gain =
        ls.transpose().triangularView<Eigen::Upper>().solve(tmp).transpose();  // Q C^T S^{-1}
    const Eigen::VectorXd predicted_y = obs_matrix * prior.mean + offset;
    ConditionResult out;
    out.posterior.mean = prior.mean + gain * (y - predicted_y);
    out.posterior.cov =
        symmetrize(prior.cov - gain * cq);
    out.log_evidence = log_gauss_with_cholesky(y, predicted_y, ls);
    return out;
}

/// Joint Gaussian over the stacked vector (x, y) with x ~ N(psi, Q) and
/// y | x ~ N(C x + offset, R): block mean (psi, C psi + offset) and block
/// covariance [[Q, Q C^T], [C Q, R + C Q C^T]].
inline Gaussian joint_gaussian(const Gaussian& prior, const Eigen::MatrixXd& obs_matrix,
                               const Eigen::VectorXd& offset, const Eigen::MatrixXd& obs_noise) {
    const Eigen::Index n = prior.dim();
    const Eigen::Index p = obs_matrix.rows();
    if (obs_matrix.cols() != n || offset.size() != p || obs_noise.rows() != p ||
        obs_noise.cols() != p) {
        throw DimensionError("joint_gaussian: dimension mismatch");
    }
    Gaussian out;
    out.mean.resize(n + p);
    out.mean.head(n) = prior.mean;
    out.mean.tail(p) = obs_matrix * prior.mean + offset;
    out.cov.resize(n + p, n + p);
    const Eigen::MatrixXd cq = obs_matrix * prior.cov;
    out.cov.topLeftCorner(n, n) = prior.cov;
    out.cov.topRightCorner(n, p) = cq.transpose();
    out.cov.bottomLeftCorner(p, n) = cq;
    out.cov.bottomRightCorner(p, p) = symmetrize(obs_noise + cq * obs_matrix.transpose());
    return out;
}

struct BackwardFormResult {
    double log_alpha = 0.0;
    Gaussian gaussian;
};

/// Rewrite N(y; O x + offset, P), viewed as an unnormalized function of x,
/// as exp(log_alpha) * N(x; F^{-1} G, F^{-1}) with F = O^T P^{-1} O and
/// G = O^T P^{-1} (y - offset). log_alpha is fixed by requiring the identity
/// to hold pointwise; with n = dim(x),
///   log_alpha = -0.5 log det(2 pi P) + 0.5 [n log 2 pi - log det F]
///               - 0.5 [(y-offset)^T P^{-1} (y-offset) - G^T F^{-1} G].
/// Requires O to have full column rank with cond(F) below `max_condition`.
inline BackwardFormResult backward_form_to_gaussian(const Eigen::MatrixXd& obs_stack,
                                                    const Eigen::VectorXd& offset,
                                                    const Eigen::MatrixXd& noise,
                                                    const Eigen::VectorXd& y,
                                                    double max_condition = 1e12) {
    const Eigen::Index s = obs_stack.rows();
    const Eigen::Index n = obs_stack.cols();
    if (offset.size() != s || noise.rows() != s || noise.cols() != s || y.size() != s) {
        throw DimensionError("backward_form_to_gaussian: dimension mismatch");
    }
    if (s < n) throw UnreducibleBackwardFormError("unreducible backward form: stack shorter than state");
    const Eigen::MatrixXd lp = cholesky_lower(noise);
    const Eigen::MatrixXd wo = lp.triangularView<Eigen::Lower>().solve(obs_stack);  // L^{-1} O
    const Eigen::VectorXd wr = lp.triangularView<Eigen::Lower>().solve(y - offset); // L^{-1}(y-mu)
    const Eigen::MatrixXd f = symmetrize(wo.transpose() * wo);
    if (spd_condition_number(f) >= max_condition) {
        throw UnreducibleBackwardFormError("unreducible backward form: rank-deficient stack");
    }
    const Eigen::VectorXd g = wo.transpose() * wr;
    const double h = wr.squaredNorm();
    const Eigen::MatrixXd lf = cholesky_lower(f);
    const Eigen::VectorXd half = lf.triangularView<Eigen::Lower>().solve(g);
    Eigen::MatrixXd finv = lf.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    finv = lf.transpose().triangularView<Eigen::Upper>().solve(finv);

    BackwardFormResult out;
    out.gaussian.mean = lf.transpose().triangularView<Eigen::Upper>().solve(half);
    out.gaussian.cov = symmetrize(finv);
    const double log_det_p = log_det_from_cholesky(lp);
    const double log_det_f = log_det_from_cholesky(lf);
    out.log_alpha = -0.5 * (static_cast<double>(s) * kLogTwoPi + log_det_p) +
                    0.5 * (static_cast<double>(n) * kLogTwoPi - log_det_f) -
                    0.5 * (h - half.squaredNorm());
    return out;
}

/// Overall mean and total covariance (within-component plus spread) of a
/// normalized mixture.
inline Gaussian mixture_moments(const GaussianMixture& m) {
    if (!m.normalized) throw Error("mixture_moments: mixture must be normalized");
    if (m.empty()) throw Error("mixture_moments: empty mixture");
    const Eigen::Index n = m.components.front().gaussian.dim();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
    for (const auto& c : m.components) mean += std::exp(c.log_weight) * c.gaussian.mean;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& c : m.components) {
        const double w = std::exp(c.log_weight);
        const Eigen::VectorXd d = c.gaussian.mean - mean;
        cov += w * (c.gaussian.cov + d * d.transpose());
    }
    return Gaussian(std::move(mean), symmetrize(cov));
}

/// Drop components whose weight relative to the mixture total is below
/// exp(min_relative_log_weight). Returns the number of dropped components.
/// The result keeps the surviving weights untouched (not renormalized).
inline int prune_by_relative_weight(GaussianMixture& m, double min_relative_log_weight) {
    if (m.empty()) return 0;
    const double z = m.log_total_weight();
    std::vector<WeightedGaussian> kept;
    kept.reserve(m.size());
    int dropped = 0;
    for (auto& c : m.components) {
        if (c.log_weight - z >= min_relative_log_weight) {
            kept.push_back(std::move(c));
        } else {
            ++dropped;
        }
    }
    if (dropped > 0) {
        m.components = std::move(kept);
        m.normalized = false;
    }
    return dropped;
}

namespace detail {

/// Moment-matching merge of two weighted Gaussians; preserves the pair's
/// total weight, mean and covariance exactly.
inline WeightedGaussian moment_match_pair(const WeightedGaussian& a, const WeightedGaussian& b) {
    const double lw = log_add_exp(a.log_weight, b.log_weight);
    const double wa = std::exp(a.log_weight - lw);
    const double wb = std::exp(b.log_weight - lw);
    WeightedGaussian out;
    out.log_weight = lw;
    out.gaussian.mean = wa * a.gaussian.mean + wb * b.gaussian.mean;
    const Eigen::VectorXd d = a.gaussian.mean - b.gaussian.mean;
    out.gaussian.cov =
        symmetrize(wa * a.gaussian.cov + wb * b.gaussian.cov + (wa * wb) * (d * d.transpose()));
    return out;
}

/// Runnalls' KL upper bound for merging components i and j:
///   B = 0.5 [ (wi+wj) log det(S_merge) - wi log det(S_i) - wj log det(S_j) ].
/// Weights may be scaled by any common factor without changing the argmin.
inline double joining_cost(const WeightedGaussian& a, double log_det_a, const WeightedGaussian& b,
                           double log_det_b, double log_weight_scale) {
    const double wa = std::exp(a.log_weight - log_weight_scale);
    const double wb = std::exp(b.log_weight - log_weight_scale);
    const double w = wa + wb;
    if (w <= 0.0) return 0.0;
    const double fa = wa / w;
    const double fb = wb / w;
    const Eigen::VectorXd d = a.gaussian.mean - b.gaussian.mean;
    const Eigen::MatrixXd merged = fa * a.gaussian.cov + fb * b.gaussian.cov +
                                   (fa * fb) * (d * d.transpose());
    const double log_det_m = log_det_from_cholesky(cholesky_lower(symmetrize(merged)));
    return 0.5 * (w * log_det_m - wa * log_det_a - wb * log_det_b);
}

} // namespace detail

/// Gaussian-mixture reduction by joining: repeatedly merge the pair with the
/// smallest KL-divergence upper bound (moment-matching merge) until at most
/// `max_components` remain. Ties break on the lowest (i, j) index pair. Total
/// weight and overall mixture moments are preserved exactly at every merge.
inline GaussianMixture reduce_by_joining(GaussianMixture m, int max_components) {
    if (max_components < 1) throw Error("reduce_by_joining: max_components must be >= 1");
    if (static_cast<int>(m.size()) <= max_components) return m;

    struct Node {
        WeightedGaussian wg;
        double log_det = 0.0;
        bool alive = true;
        double best_cost = 0.0;  // min cost against alive nodes with larger index
        int best_partner = -1;
    };
    const double scale = m.log_total_weight();
    std::vector<Node> nodes(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        nodes[i].wg = std::move(m.components[i]);
        nodes[i].log_det = log_det_from_cholesky(cholesky_lower(nodes[i].wg.gaussian.cov));
    }
    const auto cost = [&](int i, int j) {
        return detail::joining_cost(nodes[i].wg, nodes[i].log_det, nodes[j].wg, nodes[j].log_det,
                                    scale);
    };
    const int total = static_cast<int>(nodes.size());
    const auto refresh_row = [&](int i) {
        nodes[i].best_partner = -1;
        nodes[i].best_cost = std::numeric_limits<double>::infinity();
        for (int j = i + 1; j < total; ++j) {
            if (!nodes[j].alive) continue;
            const double c = cost(i, j);
            if (c < nodes[i].best_cost) {
                nodes[i].best_cost = c;
                nodes[i].best_partner = j;
            }
        }
    };
    for (int i = 0; i < total; ++i) {
        if (nodes[i].alive) refresh_row(i);
    }

    int alive = total;
    while (alive > max_components) {
        int best_i = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < total; ++i) {
            if (!nodes[i].alive || nodes[i].best_partner < 0) continue;
            if (nodes[i].best_cost < best) {
                best = nodes[i].best_cost;
                best_i = i;
            }
        }
        const int i = best_i;
        const int j = nodes[i].best_partner;
        nodes[i].wg = detail::moment_match_pair(nodes[i].wg, nodes[j].wg);
        nodes[i].log_det = log_det_from_cholesky(cholesky_lower(nodes[i].wg.gaussian.cov));
        nodes[j].alive = false;
        --alive;
        // Any row whose cached partner was i or j is stale; rows below i may
        // also prefer the merged component.
        for (int r = 0; r < total; ++r) {
            if (!nodes[r].alive || r == i) continue;
            if (nodes[r].best_partner == i || nodes[r].best_partner == j) {
                refresh_row(r);
            } else if (r < i) {
                const double c = cost(r, i);
                if (c < nodes[r].best_cost) {
                    nodes[r].best_cost = c;
                    nodes[r].best_partner = i;
                }
            }
        }
        refresh_row(i);
    }

    GaussianMixture out;
    out.components.reserve(alive);
    for (auto& nd : nodes) {
        if (nd.alive) out.components.push_back(std::move(nd.wg));
    }
    out.normalized = false;
    return out;
}

/// Coarse pre-clustering used before exact joining when a mixture is too
/// large for the pairwise scan: heaviest-first greedy absorption of all
/// components within a Mahalanobis radius of the seed, moment-matched per
/// cluster. Every group merge preserves total mixture moments exactly.
inline GaussianMixture precluster_by_distance(GaussianMixture m, std::size_t target_size,
                                              double radius = 0.3) {
    while (m.size() > target_size) {
        std::vector<std::size_t> order(m.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return m.components[a].log_weight > m.components[b].log_weight;
        });
        std::vector<bool> used(m.size(), false);
        GaussianMixture next;
        next.components.reserve(target_size);
        for (std::size_t oi = 0; oi < order.size(); ++oi) {
            const std::size_t s = order[oi];
            if (used[s]) continue;
            used[s] = true;
            WeightedGaussian acc = m.components[s];
            const Eigen::MatrixXd lseed = cholesky_lower(acc.gaussian.cov);
            for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
                const std::size_t c = order[oj];
                if (used[c]) continue;
                const Eigen::VectorXd d = lseed.triangularView<Eigen::Lower>().solve(
                    m.components[c].gaussian.mean - m.components[s].gaussian.mean);
                if (d.squaredNorm() <= radius * radius) {
                    acc = detail::moment_match_pair(acc, m.components[c]);
                    used[c] = true;
                }
            }
            next.components.push_back(std::move(acc));
        }
        if (next.size() >= m.size()) {
            radius *= 2.0;  // no progress; widen and retry
        }
        m = std::move(next);
        if (radius > 64.0) break;
    }
    m.normalized = false;
    return m;
}

} // namespace qgs

#endif // QGS_GAUSSIAN_HPP
