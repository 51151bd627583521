#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qgs/quadrature.hpp"

using namespace qgs;
using Catch::Approx;

namespace {

double integrate_monomial(const QuadratureRule& rule, int degree) {
    double acc = 0.0;
    for (int i = 0; i < rule.order; ++i) {
        acc += rule.weights[i] * std::pow(rule.nodes[i], degree);
    }
    return acc;
}

double exact_monomial(int degree) { return degree % 2 == 1 ? 0.0 : 2.0 / (degree + 1); }

} // namespace

TEST_CASE("classical low-order rules") {
    SECTION("L = 1") {
        const auto r = legendre_rule(1);
        REQUIRE(r.nodes.size() == 1);
        CHECK(r.nodes[0] == Approx(0.0).margin(1e-16));
        CHECK(r.weights[0] == Approx(2.0));
    }
    SECTION("L = 2") {
        const auto r = legendre_rule(2);
        CHECK(r.nodes[0] == Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
        CHECK(r.nodes[1] == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
        CHECK(r.weights[0] == Approx(1.0));
        CHECK(r.weights[1] == Approx(1.0));
    }
    SECTION("L = 5 integrates x^8 to 2/9") {
        const auto r = legendre_rule(5);
        CHECK(integrate_monomial(r, 8) == Approx(2.0 / 9.0).margin(1e-13));
    }
}

TEST_CASE("rule structure invariants") {
    for (int order : {1, 2, 3, 7, 10, 40, 99, 200}) {
        const auto r = legendre_rule(order);
        double wsum = 0.0;
        for (int i = 0; i < order; ++i) {
            wsum += r.weights[i];
            CHECK(r.weights[i] > 0.0);
            if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
            CHECK(r.nodes[i] == Approx(-r.nodes[order - 1 - i]).margin(1e-15));
            CHECK(std::abs(r.nodes[i]) < 1.0);
        }
        CHECK(wsum == Approx(2.0).margin(1e-12));
    }
}

TEST_CASE("exactness up to degree 2L-1") {
    for (int order = 1; order <= 40; ++order) {
        const auto r = legendre_rule(order);
        for (int degree = 0; degree <= 2 * order - 1; ++degree) {
            CHECK(std::abs(integrate_monomial(r, degree) - exact_monomial(degree)) <= 1e-12);
        }
    }
}

TEST_CASE("order bounds") {
    CHECK_THROWS_AS(legendre_rule(0), Error);
    CHECK_THROWS_AS(legendre_rule(201), Error);
}

TEST_CASE("cache returns the same immutable rule") {
    const auto& a = cached_legendre_rule(12);
    const auto& b = cached_legendre_rule(12);
    CHECK(&a == &b);
}
