#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qgs/gaussian.hpp"
#include "helpers.hpp"

using namespace qgs;
using qgs_test::Draw;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("log_gauss_eval matches closed forms") {
    SECTION("standard normal at the mode") {
        const auto g = Gaussian::scalar(0.0, 1.0);
        CHECK(log_gauss_eval(Eigen::VectorXd::Zero(1), g) == Approx(-0.5 * std::log(2.0 * kPi)));
    }
    SECTION("exponent vanishes at the mean for any dimension") {
        for (int n : {1, 2, 5}) {
            Gaussian g(Eigen::VectorXd::Ones(n), Eigen::MatrixXd::Identity(n, n));
            CHECK(log_gauss_eval(g.mean, g) == Approx(-0.5 * n * std::log(2.0 * kPi)));
        }
    }
    SECTION("x=1, mu=0, var=2") {
        const auto g = Gaussian::scalar(0.0, 2.0);
        const double expected = -0.5 * std::log(4.0 * kPi) - 0.25;
        CHECK(log_gauss_eval(Eigen::VectorXd::Ones(1), g) == Approx(expected).epsilon(1e-12));
    }
    SECTION("degenerate covariance reports the failing pivot") {
        Gaussian g(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2));
        g.cov(0, 0) = 1.0;  // second pivot fails
        try {
            log_gauss_eval(Eigen::VectorXd::Zero(2), g);
            FAIL("expected DegenerateCovarianceError");
        } catch (const DegenerateCovarianceError& e) {
            CHECK(e.pivot_index == 1);
        }
    }
}

TEST_CASE("condition_on_linear_observation") {
    SECTION("scalar conjugate update") {
        const auto res = condition_on_linear_observation(
            Gaussian::scalar(0.0, 1.0), Eigen::MatrixXd::Identity(1, 1),
            Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1),
            Eigen::VectorXd::Ones(1));
        CHECK(res.posterior.mean(0) == Approx(0.5));
        CHECK(res.posterior.cov(0, 0) == Approx(0.5));
        CHECK(res.log_evidence ==
              Approx(log_gauss_eval(Eigen::VectorXd::Ones(1), Gaussian::scalar(0.0, 2.0))));
    }
    SECTION("uninformative observation leaves the prior untouched") {
        Draw d(7);
        const Gaussian prior = d.gaussian(3);
        const Eigen::MatrixXd c = Eigen::MatrixXd::Zero(1, 3);
        const Eigen::VectorXd mu = d.vector(1);
        const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, 0.8);
        const Eigen::VectorXd y = d.vector(1);
        const auto res = condition_on_linear_observation(prior, c, mu, r, y);
        CHECK((res.posterior.mean - prior.mean).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((res.posterior.cov - prior.cov).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(res.log_evidence == Approx(log_gauss_eval(y, Gaussian(mu, r))));
    }
    SECTION("3-dim case matches joint construction plus Schur conditioning") {
        Draw d(11);
        for (int rep = 0; rep < 20; ++rep) {
            const Gaussian prior = d.gaussian(3);
            const Eigen::MatrixXd c = d.matrix(2, 3);
            const Eigen::VectorXd mu = d.vector(2);
            const Eigen::MatrixXd r = d.spd(2);
            const Eigen::VectorXd y = d.vector(2);
            const auto res = condition_on_linear_observation(prior, c, mu, r, y);

            // Oracle: build the joint over (x, y) and condition analytically.
            const Gaussian joint = joint_gaussian(prior, c, mu, r);
            const Eigen::MatrixXd sxx = joint.cov.topLeftCorner(3, 3);
            const Eigen::MatrixXd sxy = joint.cov.topRightCorner(3, 2);
            const Eigen::MatrixXd syy = joint.cov.bottomRightCorner(2, 2);
            const Eigen::MatrixXd k = sxy * syy.inverse();
            const Eigen::VectorXd mean = joint.mean.head(3) + k * (y - joint.mean.tail(2));
            const Eigen::MatrixXd cov = sxx - k * sxy.transpose();
            CHECK((res.posterior.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((res.posterior.cov - cov).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(qgs_test::gaussian_invariants_hold(res.posterior));
        }
    }
    SECTION("conditioning on two independent observations is order independent") {
        Draw d(13);
        for (int rep = 0; rep < 20; ++rep) {
            const Gaussian prior = d.gaussian(2);
            const Eigen::MatrixXd c1 = d.matrix(1, 2), c2 = d.matrix(1, 2);
            const Eigen::VectorXd m1 = d.vector(1), m2 = d.vector(1);
            const Eigen::MatrixXd r1 = d.spd(1), r2 = d.spd(1);
            const Eigen::VectorXd y1 = d.vector(1), y2 = d.vector(1);
            const auto ab = condition_on_linear_observation(
                condition_on_linear_observation(prior, c1, m1, r1, y1).posterior, c2, m2, r2, y2);
            const auto ba = condition_on_linear_observation(
                condition_on_linear_observation(prior, c2, m2, r2, y2).posterior, c1, m1, r1, y1);
            CHECK((ab.posterior.mean - ba.posterior.mean).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((ab.posterior.cov - ba.posterior.cov).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SECTION("singular innovation raises") {
        const Gaussian prior = Gaussian::scalar(0.0, 0.0);
        CHECK_THROWS_AS(
            condition_on_linear_observation(prior, Eigen::MatrixXd::Identity(1, 1),
                                            Eigen::VectorXd::Zero(1),
                                            Eigen::MatrixXd::Zero(1, 1),
                                            Eigen::VectorXd::Zero(1)),
            DegenerateInnovationError);
    }
}

TEST_CASE("joint_gaussian") {
    SECTION("scalar block formula") {
        const Gaussian j =
            joint_gaussian(Gaussian::scalar(0.0, 1.0), Eigen::MatrixXd::Identity(1, 1),
                           Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
        Eigen::MatrixXd expect(2, 2);
        expect << 1, 1, 1, 2;
        CHECK((j.cov - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("C = 0 gives a block-diagonal covariance") {
        Draw d(3);
        const Gaussian prior = d.gaussian(2);
        const Eigen::MatrixXd r = d.spd(1);
        const Gaussian j = joint_gaussian(prior, Eigen::MatrixXd::Zero(1, 2),
                                          Eigen::VectorXd::Zero(1), r);
        CHECK(j.cov.topRightCorner(2, 1).cwiseAbs().maxCoeff() == 0.0);
        CHECK(j.cov(2, 2) == Approx(r(0, 0)));
    }
    SECTION("sampling x then y|x reproduces the joint second moments") {
        Draw d(5);
        const Gaussian prior = d.gaussian(2);
        const Eigen::MatrixXd c = d.matrix(1, 2);
        const Eigen::VectorXd mu = d.vector(1);
        const Eigen::MatrixXd r = d.spd(1);
        const Gaussian joint = joint_gaussian(prior, c, mu, r);

        const int ns = 1000000;
        const Eigen::MatrixXd lx = cholesky_lower(prior.cov);
        const double sr = std::sqrt(r(0, 0));
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
        Draw s(99);
        for (int i = 0; i < ns; ++i) {
            const Eigen::VectorXd x = prior.mean + lx * s.vector(2);
            const double y = c.row(0).dot(x) + mu(0) + sr * s.normal();
            Eigen::Vector3d v;
            v << x(0), x(1), y;
            mean += v;
            second += v * v.transpose();
        }
        mean /= ns;
        const Eigen::Matrix3d cov = second / ns - mean * mean.transpose();
        // Monte Carlo tolerance: a few standard errors of each entry.
        const double tol = 6.0 * joint.cov.cwiseAbs().maxCoeff() / std::sqrt(double(ns));
        CHECK((mean - joint.mean).cwiseAbs().maxCoeff() < tol);
        CHECK((cov - joint.cov).cwiseAbs().maxCoeff() < 10.0 * tol);
    }
    SECTION("y-marginal equals the conditioning evidence Gaussian") {
        Draw d(21);
        const Gaussian prior = d.gaussian(3);
        const Eigen::MatrixXd c = d.matrix(2, 3);
        const Eigen::VectorXd mu = d.vector(2);
        const Eigen::MatrixXd r = d.spd(2);
        const Eigen::VectorXd y = d.vector(2);
        const Gaussian joint = joint_gaussian(prior, c, mu, r);
        const auto res = condition_on_linear_observation(prior, c, mu, r, y);
        const Gaussian marginal(joint.mean.tail(2), joint.cov.bottomRightCorner(2, 2));
        CHECK(log_gauss_eval(y, marginal) == Approx(res.log_evidence).epsilon(1e-12));
    }
}

TEST_CASE("backward_form_to_gaussian") {
    SECTION("identity stack flips the roles of x and y exactly") {
        Draw d(17);
        const Eigen::MatrixXd sigma = d.spd(2);
        const Eigen::VectorXd y = d.vector(2);
        const auto res = backward_form_to_gaussian(Eigen::MatrixXd::Identity(2, 2),
                                                   Eigen::VectorXd::Zero(2), sigma, y);
        CHECK(res.log_alpha == Approx(0.0).margin(1e-12));
        CHECK((res.gaussian.mean - y).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((res.gaussian.cov - sigma).cwiseAbs().maxCoeff() < 1e-12);
        for (int k = 0; k < 5; ++k) {
            const Eigen::VectorXd x = d.vector(2);
            const double lhs = log_gauss_eval(y, Gaussian(x, sigma));
            const double rhs = res.log_alpha + log_gauss_eval(x, res.gaussian);
            CHECK(lhs == Approx(rhs).margin(1e-11));
        }
    }
    SECTION("scalar stack O=2, P=1, y=4") {
        const auto res = backward_form_to_gaussian(
            Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1),
            Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, 4.0));
        CHECK(res.gaussian.mean(0) == Approx(2.0));
        CHECK(res.gaussian.cov(0, 0) == Approx(0.25));
    }
    SECTION("stacked random form is pointwise exact") {
        Draw d(23);
        for (int rep = 0; rep < 10; ++rep) {
            const Eigen::MatrixXd o = d.matrix(3, 2);
            const Eigen::VectorXd mu = d.vector(3);
            const Eigen::MatrixXd p = d.spd(3);
            const Eigen::VectorXd y = d.vector(3);
            const auto res = backward_form_to_gaussian(o, mu, p, y);
            for (int k = 0; k < 10; ++k) {
                const Eigen::VectorXd x = d.vector(2);
                const double lhs = log_gauss_eval(y, Gaussian(o * x + mu, p));
                const double rhs = res.log_alpha + log_gauss_eval(x, res.gaussian);
                CHECK(lhs == Approx(rhs).margin(1e-9));
            }
        }
    }
    SECTION("rank-deficient stack raises") {
        Eigen::MatrixXd o(2, 2);
        o << 1, 0, 1, 0;  // column 2 unobserved
        CHECK_THROWS_AS(backward_form_to_gaussian(o, Eigen::VectorXd::Zero(2),
                                                  Eigen::MatrixXd::Identity(2, 2),
                                                  Eigen::VectorXd::Zero(2)),
                        UnreducibleBackwardFormError);
    }
}

TEST_CASE("mixture_moments") {
    SECTION("single component is returned unchanged") {
        GaussianMixture m;
        m.add(0.0, Gaussian::scalar(1.5, 0.7));
        m.normalize();
        const Gaussian g = mixture_moments(m);
        CHECK(g.mean(0) == Approx(1.5));
        CHECK(g.cov(0, 0) == Approx(0.7));
    }
    SECTION("two equal-weight components at +-1") {
        GaussianMixture m;
        m.add(std::log(0.5), Gaussian::scalar(1.0, 1.0));
        m.add(std::log(0.5), Gaussian::scalar(-1.0, 1.0));
        m.normalized = true;
        const Gaussian g = mixture_moments(m);
        CHECK(g.mean(0) == Approx(0.0).margin(1e-15));
        CHECK(g.cov(0, 0) == Approx(2.0));
    }
    SECTION("unnormalized input raises") {
        GaussianMixture m;
        m.add(0.3, Gaussian::scalar(0.0, 1.0));
        CHECK_THROWS_AS(mixture_moments(m), Error);
    }
    SECTION("5-component random mixture matches a sampling oracle") {
        Draw d(31);
        GaussianMixture m;
        for (int k = 0; k < 5; ++k) m.add(d.uniform(-1.0, 1.0), d.gaussian(2));
        m.normalize();
        const Gaussian g = mixture_moments(m);

        const int ns = 1000000;
        Draw s(41);
        std::vector<double> cdf;
        double acc = 0.0;
        for (const auto& c : m.components) cdf.push_back(acc += std::exp(c.log_weight));
        std::vector<Eigen::MatrixXd> chols;
        for (const auto& c : m.components) chols.push_back(cholesky_lower(c.gaussian.cov));
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
        for (int i = 0; i < ns; ++i) {
            const double u = s.uniform();
            std::size_t k = 0;
            while (k + 1 < cdf.size() && cdf[k] < u * acc) ++k;
            const Eigen::VectorXd x =
                m.components[k].gaussian.mean + chols[k] * s.vector(2);
            mean += x;
            second += x * x.transpose();
        }
        mean /= ns;
        const Eigen::Matrix2d cov = second / ns - mean * mean.transpose();
        const double se = 3.0 * std::sqrt(g.cov.cwiseAbs().maxCoeff() / double(ns));
        CHECK((mean - g.mean).cwiseAbs().maxCoeff() < 3.0 * se);
        CHECK((cov - g.cov).cwiseAbs().maxCoeff() < 30.0 * se);
    }
}

TEST_CASE("reduce_by_joining") {
    SECTION("two identical components collapse to one with the summed weight") {
        GaussianMixture m;
        m.add(std::log(0.25), Gaussian::scalar(2.0, 3.0));
        m.add(std::log(0.25), Gaussian::scalar(2.0, 3.0));
        const GaussianMixture red = reduce_by_joining(m, 1);
        REQUIRE(red.size() == 1);
        CHECK(red.components[0].log_weight == Approx(std::log(0.5)));
        CHECK(red.components[0].gaussian.mean(0) == Approx(2.0));
        CHECK(red.components[0].gaussian.cov(0, 0) == Approx(3.0));
    }
    SECTION("moment-matching formula on a separated pair") {
        GaussianMixture m;
        m.add(std::log(0.5), Gaussian::scalar(0.0, 1.0));
        m.add(std::log(0.5), Gaussian::scalar(10.0, 1.0));
        const GaussianMixture red = reduce_by_joining(m, 1);
        REQUIRE(red.size() == 1);
        CHECK(red.components[0].gaussian.mean(0) == Approx(5.0));
        CHECK(red.components[0].gaussian.cov(0, 0) == Approx(26.0));
    }
    SECTION("max >= current count is a no-op") {
        Draw d(51);
        GaussianMixture m;
        for (int k = 0; k < 3; ++k) m.add(-0.5 * k, d.gaussian(1));
        const GaussianMixture red = reduce_by_joining(m, 5);
        CHECK(red.size() == 3);
    }
    SECTION("12-component scalar mixture reduced to 4 preserves moments") {
        Draw d(61);
        GaussianMixture m;
        for (int k = 0; k < 12; ++k) {
            m.add(d.uniform(-2.0, 0.0), Gaussian::scalar(d.uniform(-5.0, 5.0), d.uniform(0.2, 2.0)));
        }
        m.normalize();
        const Gaussian before = mixture_moments(m);
        GaussianMixture red = reduce_by_joining(m, 4);
        REQUIRE(red.size() == 4);
        red.normalize();
        const Gaussian after = mixture_moments(red);
        CHECK(std::abs(after.mean(0) - before.mean(0)) < 1e-12 * (1.0 + std::abs(before.mean(0))));
        CHECK(std::abs(after.cov(0, 0) - before.cov(0, 0)) < 1e-12 * before.cov(0, 0));
        CHECK(qgs_test::mixture_invariants_hold(red));
    }
    SECTION("every single merge step preserves mixture moments") {
        Draw d(71);
        GaussianMixture m;
        for (int k = 0; k < 8; ++k) m.add(d.uniform(-1.5, 0.0), d.gaussian(2));
        m.normalize();
        const Gaussian before = mixture_moments(m);
        for (int target = 7; target >= 1; --target) {
            m = reduce_by_joining(m, target);
            m.normalized = true;  // joining preserves the unit total exactly
            const Gaussian after = mixture_moments(m);
            CHECK((after.mean - before.mean).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((after.cov - before.cov).cwiseAbs().maxCoeff() <
                  1e-12 * (1.0 + before.cov.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("prune_by_relative_weight") {
    GaussianMixture m;
    m.add(0.0, Gaussian::scalar(0.0, 1.0));
    m.add(-50.0, Gaussian::scalar(1.0, 1.0));
    m.add(-1.0, Gaussian::scalar(2.0, 1.0));
    const int dropped = prune_by_relative_weight(m, -46.0);
    CHECK(dropped == 1);
    CHECK(m.size() == 2);
}

TEST_CASE("precluster_by_distance preserves total moments") {
    Draw d(81);
    GaussianMixture m;
    const Eigen::MatrixXd cov = 0.04 * Eigen::MatrixXd::Identity(1, 1);
    for (int k = 0; k < 400; ++k) {
        m.add(d.uniform(-2.0, 0.0), Gaussian(Eigen::VectorXd::Constant(1, d.uniform(-3.0, 3.0)), cov));
    }
    GaussianMixture copy = m;
    copy.normalize();
    const Gaussian before = mixture_moments(copy);
    GaussianMixture clustered = precluster_by_distance(m, 60);
    CHECK(clustered.size() <= 400);
    clustered.normalize();
    const Gaussian after = mixture_moments(clustered);
    CHECK(std::abs(after.mean(0) - before.mean(0)) < 1e-10);
    CHECK(std::abs(after.cov(0, 0) - before.cov(0, 0)) < 1e-10 * before.cov(0, 0));
}
