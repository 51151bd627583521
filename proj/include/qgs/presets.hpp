#ifndef QGS_PRESETS_HPP
#define QGS_PRESETS_HPP

#include <limits>
#include <string>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/model.hpp"

namespace qgs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline MonotoneBranch affine_branch(double lo, double hi, double a, double b) {
    MonotoneBranch br;
    br.domain = {lo, hi};
    br.kind = MapKind::Affine;
    br.a = a;
    br.b = b;
    return br;
}

inline MonotoneBranch square_branch(double lo, double hi) {
    MonotoneBranch br;
    br.domain = {lo, hi};
    br.kind = MapKind::Square;
    return br;
}

} // namespace detail

/// Named nonlinearities. "example1".."example3" are the maps used by the
/// bundled experiment presets; the rest are generic shapes. Flat segments
/// are represented as quantization sets over bounded intervals.
inline PiecewiseNonlinearity preset_nonlinearity(const std::string& name) {
    PiecewiseNonlinearity nl;
    if (name == "identity") {
        nl.branches.push_back(detail::affine_branch(-kInf, kInf, 1.0, 0.0));
    } else if (name == "example1" || name == "square") {
        nl.branches.push_back(detail::square_branch(-kInf, 0.0));
        nl.branches.push_back(detail::square_branch(0.0, kInf));
    } else if (name == "example2" || name == "abs-square") {
        // |r| for r <= 0, r^2 for r > 0.
        MonotoneBranch neg;
        neg.domain = {-kInf, 0.0};
        neg.kind = MapKind::NegAbs;
        nl.branches.push_back(neg);
        nl.branches.push_back(detail::square_branch(0.0, kInf));
    } else if (name == "example3" || name == "deadzone") {
        // r+3 below -3, 0 on [-3, 3), r-3 from 3 up.
        nl.branches.push_back(detail::affine_branch(-kInf, -3.0, 1.0, 3.0));
        nl.quant_sets.push_back({-3.0, 3.0, 0.0});
        nl.branches.push_back(detail::affine_branch(3.0, kInf, 1.0, -3.0));
    } else if (name == "saturation") {
        // Unit slopes saturating at +-1; flat tails bounded at +-100 so the
        // quantization preimages stay bounded intervals.
        nl.quant_sets.push_back({-100.0, -1.0, -1.0});
        nl.branches.push_back(detail::affine_branch(-1.0, 1.0, 1.0, 0.0));
        nl.quant_sets.push_back({1.0, 100.0, 1.0});
    } else if (name == "rectifier") {
        nl.quant_sets.push_back({-100.0, 0.0, 0.0});
        nl.branches.push_back(detail::affine_branch(0.0, kInf, 1.0, 0.0));
    } else if (name == "quantizer") {
        // 3-level mid-rise quantizer with step 2 on [-3, 3).
        nl.quant_sets.push_back({-3.0, -1.0, -2.0});
        nl.quant_sets.push_back({-1.0, 1.0, 0.0});
        nl.quant_sets.push_back({1.0, 3.0, 2.0});
    } else {
        throw ConfigError("unknown nonlinearity preset: " + name);
    }
    return nl;
}

inline std::vector<std::string> nonlinearity_preset_names() {
    return {"identity", "example1", "example2", "example3",
            "deadzone", "saturation", "quantizer", "rectifier"};
}

/// Linear blocks and noise settings of the three bundled example systems.
inline WienerModel preset_model(const std::string& name) {
    WienerModel md;
    if (name == "example1") {
        md.A = Eigen::MatrixXd::Constant(1, 1, 0.9);
        md.B = Eigen::MatrixXd::Constant(1, 1, 2.5);
        md.C = Eigen::RowVectorXd::Constant(1, 1.1);
        md.D = Eigen::RowVectorXd::Constant(1, 1.5);
        md.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
        md.R = 0.5;
        md.P = 0.5;
        md.mu1 = Eigen::VectorXd::Constant(1, 1.0);
        md.P1 = Eigen::MatrixXd::Constant(1, 1, 1.0);
    } else if (name == "example2") {
        md.A.resize(2, 2);
        md.A << 0.9, 0.1, -0.1, 0.7;
        md.B.resize(2, 1);
        md.B << 1.5, 2.5;
        md.C.resize(2);
        md.C << 1.1, 0.3;
        md.D = Eigen::RowVectorXd::Constant(1, 1.2);
        md.Q = Eigen::MatrixXd::Identity(2, 2);
        md.R = 0.5;
        md.P = 0.5;
        md.mu1 = Eigen::VectorXd::Ones(2);
        md.P1 = Eigen::MatrixXd::Identity(2, 2);
    } else if (name == "example3") {
        md.A.resize(4, 4);
        md.A << 0.52, 0.4, 0.0, 0.0,
                -0.4, 0.52, 0.0, 0.0,
                0.0, 0.0, 0.4, 0.6,
                0.0, 0.0, 0.06, -0.4;
        md.B.resize(4, 2);
        md.B << 0.56, -0.58,
                1.1, 0.5,
                5.3, -0.8,
                -1.9, -0.45;
        md.C.resize(4);
        md.C << 0.5, 0.1, 0.5, 0.7;
        md.D.resize(2);
        md.D << 0.0, 0.0;
        md.Q = 2.0 * Eigen::MatrixXd::Identity(4, 4);
        md.R = 1.0;
        md.P = 0.5;
        md.mu1 = Eigen::VectorXd::Ones(4);
        md.P1 = Eigen::MatrixXd::Identity(4, 4);
    } else {
        throw ConfigError("unknown model preset: " + name);
    }
    return md;
}

inline std::vector<std::string> model_preset_names() {
    return {"example1", "example2", "example3"};
}

/// Input used by all three bundled examples: i.i.d. N(0, 2) per channel.
inline InputSpec preset_input(const WienerModel& model) {
    const Eigen::Index m = model.input_dim();
    return InputSpec::iid_gaussian(Eigen::VectorXd::Zero(m),
                                   Eigen::VectorXd::Constant(m, std::sqrt(2.0)));
}

} // namespace qgs

#endif // QGS_PRESETS_HPP
