#ifndef QGS_NUMERIC_HPP
#define QGS_NUMERIC_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "qgs/error.hpp"

namespace qgs {

inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(xs[i])), stable against overflow. Empty input gives -inf.
inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;  // all -inf (or empty)
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_sum_exp(const std::vector<double>& xs) {
    return log_sum_exp(std::span<const double>(xs.data(), xs.size()));
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) {
    if (a < b) std::swap(a, b);
    if (!std::isfinite(a)) return a;
    return a + std::log1p(std::exp(b - a));
}

/// 0.5*(A + A^T); bounds round-off drift accumulated over long recursions.
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
    return 0.5 * (a + a.transpose());
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Throws DegenerateCovarianceError carrying the failing pivot index.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    if (a.cols() != n) throw DimensionError("cholesky_lower: matrix not square");
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw DegenerateCovarianceError("degenerate covariance", static_cast<int>(j));
        }
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

/// log det(A) for SPD A, from its lower Cholesky factor.
inline double log_det_from_cholesky(const Eigen::MatrixXd& l) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

/// log N(x; mu, Sigma) given the lower Cholesky factor of Sigma.
inline double log_gauss_with_cholesky(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                                      const Eigen::MatrixXd& l) {
    Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(x - mu);
    return -0.5 * static_cast<double>(x.size()) * kLogTwoPi - 0.5 * log_det_from_cholesky(l) -
           0.5 * w.squaredNorm();
}

/// log N(x; mu, s2) for scalars.
inline double log_gauss_scalar(double x, double mu, double s2) {
    const double d = x - mu;
    return -0.5 * (kLogTwoPi + std::log(s2)) - 0.5 * d * d / s2;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Condition number (ratio of extreme eigenvalue magnitudes) of a symmetric matrix.
/// Returns +inf when the smallest eigenvalue is not strictly positive.
inline double spd_condition_number(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
    const auto& ev = es.eigenvalues();
    double lo = ev(0), hi = ev(ev.size() - 1);
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

} // namespace qgs

#endif // QGS_NUMERIC_HPP
