#ifndef QGS_QUADRATURE_HPP
#define QGS_QUADRATURE_HPP

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "qgs/error.hpp"

namespace qgs {

/// Gauss-Legendre rule on [-1, 1]: nodes are the roots of the degree-L
/// Legendre polynomial, weights 2 / ((1 - x^2) P_L'(x)^2).
struct QuadratureRule {
    int order = 0;
    std::vector<double> nodes;    // strictly increasing, symmetric about 0
    std::vector<double> weights;  // positive, summing to 2
};

/// Build the L-point rule by Newton iteration from Chebyshev initial guesses.
inline QuadratureRule legendre_rule(int order) {
    if (order < 1 || order > 200) throw Error("legendre_rule: order must be in [1, 200]");
    QuadratureRule rule;
    rule.order = order;
    rule.nodes.assign(order, 0.0);
    rule.weights.assign(order, 0.0);
    const int half = (order + 1) / 2;
    for (int i = 1; i <= half; ++i) {
        double x = std::cos(std::numbers::pi * (i - 0.25) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Evaluate P_L and P_L' by the three-term recurrence.
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= order; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
            }
            dp = order * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) <= 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i - 1] = -x;
        rule.nodes[order - i] = x;
        rule.weights[i - 1] = w;
        rule.weights[order - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;  // exact midpoint for odd orders
    return rule;
}

/// Shared per-order cache; entries are immutable once built.
inline const QuadratureRule& cached_legendre_rule(int order) {
    static std::mutex mu;
    static std::map<int, QuadratureRule> table;
    std::scoped_lock lock(mu);
    auto it = table.find(order);
    if (it == table.end()) it = table.emplace(order, legendre_rule(order)).first;
    return it->second;
}

} // namespace qgs

#endif // QGS_QUADRATURE_HPP
