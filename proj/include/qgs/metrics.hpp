#ifndef QGS_METRICS_HPP
#define QGS_METRICS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/gaussian.hpp"

namespace qgs {

/// Uniform evaluation grid.
struct GridSpec {
    double lo = 0.0;
    double hi = 1.0;
    int points = 400;

    std::vector<double> values() const {
        if (points < 2 || !(hi > lo)) throw Error("GridSpec: need hi > lo and >= 2 points");
        std::vector<double> xs(points);
        const double step = (hi - lo) / (points - 1);
        for (int i = 0; i < points; ++i) xs[i] = lo + i * step;
        return xs;
    }
    double step() const { return (hi - lo) / (points - 1); }
};

/// Grid centered on a Gaussian summary: mean +- k total standard deviations.
inline GridSpec grid_around(const Gaussian& g, double k_sigma = 5.0, int points = 400) {
    const double sd = std::sqrt(g.cov(0, 0));
    return {g.mean(0) - k_sigma * sd, g.mean(0) + k_sigma * sd, points};
}

/// Density of the first state component of a mixture on a grid (for n > 1
/// the component-wise marginal is exact: take the leading mean/variance).
inline std::vector<double> mixture_density_on_grid(const GaussianMixture& mix,
                                                   const std::vector<double>& grid) {
    std::vector<double> out(grid.size(), 0.0);
    for (const auto& c : mix.components) {
        const double w = std::exp(c.log_weight);
        const double mu = c.gaussian.mean(0);
        const double var = c.gaussian.cov(0, 0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            out[i] += w * std::exp(log_gauss_scalar(grid[i], mu, var));
        }
    }
    return out;
}

/// Weighted kernel density estimate (Gaussian kernel, Silverman bandwidth)
/// of the first state component of a sample set.
inline std::vector<double> kde_on_grid(const Eigen::MatrixXd& samples,
                                       const std::vector<double>& grid) {
    const Eigen::Index np = samples.cols();
    if (np < 2) throw Error("kde_on_grid: need at least 2 samples");
    std::vector<double> xs(np);
    for (Eigen::Index i = 0; i < np; ++i) xs[i] = samples(0, i);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / np;
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= (np - 1);
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const double iqr = sorted[static_cast<std::size_t>(0.75 * (np - 1))] -
                       sorted[static_cast<std::size_t>(0.25 * (np - 1))];
    double spread = std::sqrt(var);
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    const double bw = std::max(0.9 * spread * std::pow(static_cast<double>(np), -0.2), 1e-6);

    std::vector<double> out(grid.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(np);
    for (double x : xs) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = (grid[i] - x) / bw;
            out[i] += inv_n * std::exp(-0.5 * d * d) / (bw * std::sqrt(2.0 * std::numbers::pi));
        }
    }
    return out;
}

/// L1 distance of two grid-evaluated densities times the grid step.
/// Symmetric; roughly 2 for densities with disjoint support.
inline double pdf_distance(const std::vector<double>& a, const std::vector<double>& b,
                           const GridSpec& grid) {
    if (a.size() != b.size() || static_cast<int>(a.size()) != grid.points)
        throw Error("pdf_distance: mismatched grids");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc * grid.step();
}

/// Mean squared Euclidean error between a state sequence and its estimates.
inline double mse(const std::vector<Eigen::VectorXd>& truth,
                  const std::vector<Eigen::VectorXd>& estimates) {
    if (truth.size() != estimates.size()) throw Error("mse: length mismatch");
    double acc = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        acc += (truth[t] - estimates[t]).squaredNorm();
    }
    return acc / static_cast<double>(truth.size());
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw Error("median: empty");
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace qgs

#endif // QGS_METRICS_HPP
