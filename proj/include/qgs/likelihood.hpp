#ifndef QGS_LIKELIHOOD_HPP
#define QGS_LIKELIHOOD_HPP

#include <cmath>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/model.hpp"
#include "qgs/numeric.hpp"
#include "qgs/quadrature.hpp"

namespace qgs {

/// One pseudo-measurement: the likelihood of y given x carries a term
/// exp(log_weight) * N(zeta; C x + D u, R).
struct LikelihoodComponent {
    double log_weight = 0.0;   // log phi
    double pseudo_measurement = 0.0;  // zeta
};

/// Gaussian-mixture approximation of p(y | x) for one measurement.
struct LikelihoodMixture {
    std::vector<LikelihoodComponent> components;
    double y = 0.0;            // the measurement that produced it
    int skipped = 0;           // components dropped (out-of-image or underflow)

    std::size_t size() const { return components.size(); }
    bool empty() const { return components.empty(); }
};

// Weights below the double-precision floor exp(-745) are identically zero in
// linear arithmetic; such components are dropped rather than carried.
inline constexpr double kLogWeightFloor = -745.0;

/// Quadrature approximation of p(y | x) as K <= M1*L1 + M2*L2 weighted
/// pseudo-measurement Gaussians. Branch components use the infinite-interval
/// substitution lambda = psi / (1 - psi^2); quantization components use the
/// affine map onto [q_lower, q_upper]. Weights are left unnormalized.
inline LikelihoodMixture likelihood_mixture(const WienerModel& model,
                                            const PiecewiseNonlinearity& nl, double y, int order1,
                                            int order2) {
    if (!(model.P > 0.0))
        throw Error("eta-noise variance must be positive for the quadrature form");
    LikelihoodMixture mix;
    mix.y = y;

    const QuadratureRule& rule1 = cached_legendre_rule(order1);
    for (const auto& branch : nl.branches) {
        const auto image = branch.image();
        for (int tau = 0; tau < rule1.order; ++tau) {
            const double psi = rule1.nodes[tau];
            const double one_minus = 1.0 - psi * psi;
            const double lambda = psi / one_minus;
            const double z = y - lambda;
            if (!image.contains(z)) {
                ++mix.skipped;  // gamma-tilde = 0 convention
                continue;
            }
            if (std::abs(z) <= 1e-300 && branch.kind != MapKind::Affine &&
                branch.kind != MapKind::NegAbs) {
                ++mix.skipped;  // inverse derivative singular at the image edge
                continue;
            }
            const double log_w = std::log(rule1.weights[tau]) + branch.log_inverse_derivative(z) +
                                 log_gauss_scalar(lambda, 0.0, model.P) +
                                 std::log1p(psi * psi) - 2.0 * std::log(one_minus);
            if (!(log_w > kLogWeightFloor)) {
                ++mix.skipped;
                continue;
            }
            mix.components.push_back({log_w, branch.inverse(z)});
        }
    }

    const QuadratureRule& rule2 = cached_legendre_rule(order2);
    for (const auto& q : nl.quantization_preimages()) {
        const double half_width = 0.5 * (q.upper - q.lower);
        const double mid = 0.5 * (q.upper + q.lower);
        const double log_level = log_gauss_scalar(y - q.level, 0.0, model.P);
        for (int tau = 0; tau < rule2.order; ++tau) {
            const double log_w = std::log(rule2.weights[tau]) + log_level + std::log(half_width);
            if (!(log_w > kLogWeightFloor)) {
                ++mix.skipped;
                continue;
            }
            mix.components.push_back({log_w, rule2.nodes[tau] * half_width + mid});
        }
    }
    return mix;
}

/// Evaluate the mixture approximation of p(y | x) in the log domain, with
/// r-mean w = C x + D u.
inline double log_likelihood_at(const LikelihoodMixture& mix, double r_mean, double r_var) {
    std::vector<double> terms;
    terms.reserve(mix.size());
    for (const auto& c : mix.components) {
        terms.push_back(c.log_weight + log_gauss_scalar(c.pseudo_measurement, r_mean, r_var));
    }
    return log_sum_exp(terms);
}

/// A single-component stand-in (phi = 1, zeta = y) turning every downstream
/// recursion into its classical Kalman counterpart.
inline LikelihoodMixture single_component_likelihood(double y) {
    LikelihoodMixture mix;
    mix.y = y;
    mix.components.push_back({0.0, y});
    return mix;
}

} // namespace qgs

#endif // QGS_LIKELIHOOD_HPP
