#ifndef QGS_TESTS_HELPERS_HPP
#define QGS_TESTS_HELPERS_HPP

#include <Eigen/Dense>
#include <cstdint>

#include "qgs/gaussian.hpp"
#include "qgs/rng.hpp"

namespace qgs_test {

/// Deterministic draws for test fixtures.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : rs_(seed, qgs::stream::kOracle) {}

    double normal() { return rs_.normal(0, counter_++); }
    double uniform() { return rs_.uniform(1, counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    /// Random symmetric positive definite matrix with unit-scale spectrum.
    Eigen::MatrixXd spd(Eigen::Index n) {
        Eigen::MatrixXd a(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal();
        }
        return a * a.transpose() / static_cast<double>(n) +
               0.3 * Eigen::MatrixXd::Identity(n, n);
    }

    Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
        Eigen::MatrixXd a(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) a(i, j) = normal();
        }
        return a;
    }

    qgs::Gaussian gaussian(Eigen::Index n) { return {vector(n), spd(n)}; }

private:
    qgs::RandomStream rs_;
    std::uint64_t counter_ = 0;
};

/// Type invariants: covariance symmetric to 1e-10 relative, smallest
/// eigenvalue >= -1e-10 * trace.
inline bool gaussian_invariants_hold(const qgs::Gaussian& g) {
    const double scale = 1.0 + g.cov.cwiseAbs().maxCoeff();
    if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qgs::symmetrize(g.cov));
    return es.eigenvalues()(0) >= -1e-10 * g.cov.trace();
}

inline bool mixture_invariants_hold(const qgs::GaussianMixture& m) {
    if (m.normalized) {
        double total = 0.0;
        for (const auto& c : m.components) total += std::exp(c.log_weight);
        if (std::abs(total - 1.0) > 1e-10) return false;
    }
    for (const auto& c : m.components) {
        if (!gaussian_invariants_hold(c.gaussian)) return false;
    }
    return true;
}

} // namespace qgs_test

#endif
