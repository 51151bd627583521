#ifndef QGS_MODEL_HPP
#define QGS_MODEL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qgs/error.hpp"
#include "qgs/numeric.hpp"
#include "qgs/rng.hpp"

namespace qgs {

/// Wiener state-space system: linear block (A, B, C, D) driving a scalar
/// linear output r, mapped through a static nonlinearity g, with process
/// noise Q, linear-output noise variance R and measurement noise variance P.
struct WienerModel {
    Eigen::MatrixXd A;     // n x n
    Eigen::MatrixXd B;     // n x m
    Eigen::RowVectorXd C;  // 1 x n
    Eigen::RowVectorXd D;  // 1 x m
    Eigen::MatrixXd Q;     // n x n process noise covariance
    double R = 0.0;        // linear-output noise variance
    double P = 0.0;        // measurement noise variance
    Eigen::VectorXd mu1;   // prior mean
    Eigen::MatrixXd P1;    // prior covariance

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index input_dim() const { return B.cols(); }

    void validate() const {
        const Eigen::Index n = A.rows(), m = B.cols();
        if (A.cols() != n || B.rows() != n || C.cols() != n || D.cols() != m ||
            Q.rows() != n || Q.cols() != n || mu1.size() != n || P1.rows() != n ||
            P1.cols() != n) {
            throw DimensionError("WienerModel: inconsistent dimensions");
        }
        if (R < 0.0) throw Error("WienerModel: R must be nonnegative");
        if (!(P > 0.0)) throw Error("WienerModel: P must be positive");
        if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Q.cwiseAbs().maxCoeff()))
            throw Error("WienerModel: Q must be symmetric");
        if ((P1 - P1.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + P1.cwiseAbs().maxCoeff()))
            throw Error("WienerModel: P1 must be symmetric");
    }
};

/// Half-open interval [lo, hi); infinite endpoints allowed.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double r) const { return r >= lo && r < hi; }
    double length() const { return hi - lo; }
};

enum class MapKind { Affine, Square, NegAbs, SignedPower, Table };

/// One interval of the domain on which g is strictly monotone, with its
/// closed-form inverse gamma and inverse-derivative magnitude phi.
struct MonotoneBranch {
    Interval domain;  // [lo, hi)
    MapKind kind = MapKind::Affine;
    double a = 1.0, b = 0.0;  // affine parameters
    double power = 1.0;       // signed-power exponent
    std::vector<std::pair<double, double>> table;  // (r, z) knots, r strictly increasing

    double forward(double r) const {
        switch (kind) {
            case MapKind::Affine: return a * r + b;
            case MapKind::Square: return r * r;
            case MapKind::NegAbs: return -r;  // |r| restricted to r <= 0
            case MapKind::SignedPower:
                return (r >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(r), power);
            case MapKind::Table: return table_forward(r);
        }
        return 0.0;
    }

    /// gamma: closed-form inverse of the branch map.
    double inverse(double z) const {
        switch (kind) {
            case MapKind::Affine: return (z - b) / a;
            case MapKind::Square: return domain_nonnegative() ? std::sqrt(z) : -std::sqrt(z);
            case MapKind::NegAbs: return -z;
            case MapKind::SignedPower:
                return (z >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(z), 1.0 / power);
            case MapKind::Table: return table_inverse(z);
        }
        return 0.0;
    }

    /// phi = |d gamma / d z|, evaluated in the log domain.
    double log_inverse_derivative(double z) const {
        switch (kind) {
            case MapKind::Affine: return -std::log(std::abs(a));
            case MapKind::Square: return -std::numbers::ln2 - 0.5 * std::log(z);
            case MapKind::NegAbs: return 0.0;
            case MapKind::SignedPower:
                return -std::log(power) + (1.0 / power - 1.0) * std::log(std::abs(z));
            case MapKind::Table: return std::log(table_inverse_slope(z));
        }
        return 0.0;
    }

    double inverse_derivative(double z) const { return std::exp(log_inverse_derivative(z)); }

    /// dg/dr at r (right-handed at knots).
    double slope(double r) const {
        switch (kind) {
            case MapKind::Affine: return a;
            case MapKind::Square: return 2.0 * r;
            case MapKind::NegAbs: return -1.0;
            case MapKind::SignedPower: return power * std::pow(std::abs(r), power - 1.0);
            case MapKind::Table: return table_slope(r);
        }
        return 0.0;
    }

    bool increasing() const {
        const double lo = probe_low();
        const double hi = probe_high();
        return forward(hi) > forward(lo);
    }

    /// Image of the branch over its domain; endpoint closedness follows the
    /// half-open domain and the direction of monotonicity.
    struct Image {
        double lo, hi;
        bool lo_closed, hi_closed;
        bool contains(double z) const {
            if (z < lo || z > hi) return false;
            if (z == lo) return lo_closed;
            if (z == hi) return hi_closed;
            return true;
        }
    };

    Image image() const {
        const bool inc = increasing();
        const double at_lo = limit_at(domain.lo);
        const double at_hi = limit_at(domain.hi);
        Image img{};
        if (inc) {
            img.lo = at_lo;
            img.hi = at_hi;
            img.lo_closed = std::isfinite(domain.lo);  // domain closed at lo
            img.hi_closed = false;                     // domain open at hi
        } else {
            img.lo = at_hi;
            img.hi = at_lo;
            img.lo_closed = false;
            img.hi_closed = std::isfinite(domain.lo);
        }
        return img;
    }

private:
    bool domain_nonnegative() const { return domain.lo >= 0.0; }

    double probe_low() const {
        return std::isfinite(domain.lo) ? domain.lo : std::min(domain.hi - 1.0, -1.0);
    }
    double probe_high() const {
        return std::isfinite(domain.hi) ? domain.hi : std::max(domain.lo + 1.0, 1.0);
    }

    double limit_at(double r) const {
        if (std::isfinite(r)) return forward(r);
        // Infinite endpoint: the catalog maps all diverge monotonically.
        const double sign_r = (r > 0.0) ? 1.0 : -1.0;
        switch (kind) {
            case MapKind::Affine: return (a > 0.0 ? sign_r : -sign_r) *
                                         std::numeric_limits<double>::infinity();
            case MapKind::Square: return std::numeric_limits<double>::infinity();
            case MapKind::NegAbs: return -sign_r * std::numeric_limits<double>::infinity();
            case MapKind::SignedPower: return sign_r * std::numeric_limits<double>::infinity();
            case MapKind::Table:
                throw Error("table branch requires a bounded domain");
        }
        return 0.0;
    }

    std::size_t table_segment_by_r(double r) const {
        std::size_t k = 0;
        while (k + 2 < table.size() && r >= table[k + 1].first) ++k;
        return k;
    }
    std::size_t table_segment_by_z(double z) const {
        const bool inc = table.back().second > table.front().second;
        std::size_t k = 0;
        while (k + 2 < table.size() &&
               (inc ? z >= table[k + 1].second : z <= table[k + 1].second))
            ++k;
        return k;
    }
    double table_forward(double r) const {
        const auto k = table_segment_by_r(r);
        const auto& [r0, z0] = table[k];
        const auto& [r1, z1] = table[k + 1];
        return z0 + (r - r0) * (z1 - z0) / (r1 - r0);
    }
    double table_inverse(double z) const {
        const auto k = table_segment_by_z(z);
        const auto& [r0, z0] = table[k];
        const auto& [r1, z1] = table[k + 1];
        return r0 + (z - z0) * (r1 - r0) / (z1 - z0);
    }
    double table_slope(double r) const {
        const auto k = table_segment_by_r(r);
        return (table[k + 1].second - table[k].second) / (table[k + 1].first - table[k].first);
    }
    double table_inverse_slope(double z) const {
        const auto k = table_segment_by_z(z);
        return std::abs((table[k + 1].first - table[k].first) /
                        (table[k + 1].second - table[k].second));
    }
};

/// Interval of positive measure on which g is constant at `level`.
struct QuantizationSet {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.0;
};

struct BranchRoot {
    int branch = 0;
    double root = 0.0;        // gamma_i(z)
    double derivative = 0.0;  // phi_i(z)
};

/// Static output map assembled from monotone branches and quantization sets.
/// Intervals follow the lower-closed/upper-open convention throughout.
struct PiecewiseNonlinearity {
    std::vector<MonotoneBranch> branches;
    std::vector<QuantizationSet> quant_sets;

    /// g(r). Throws UncoveredDomainError when no piece owns r.
    double evaluate(double r) const {
        for (const auto& q : quant_sets) {
            if (r >= q.lower && r < q.upper) return q.level;
        }
        for (const auto& br : branches) {
            if (br.domain.contains(r)) return br.forward(r);
        }
        throw UncoveredDomainError("uncovered domain point r=" + std::to_string(r));
    }

    /// dg/dr at r (0 on quantization sets, right-handed at kinks).
    double slope(double r) const {
        for (const auto& q : quant_sets) {
            if (r >= q.lower && r < q.upper) return 0.0;
        }
        for (const auto& br : branches) {
            if (br.domain.contains(r)) return br.slope(r);
        }
        throw UncoveredDomainError("uncovered domain point r=" + std::to_string(r));
    }

    /// All branch roots of z = g(r): one entry per branch whose image
    /// contains z. Branches not containing z are omitted.
    std::vector<BranchRoot> monotone_roots(double z) const {
        std::vector<BranchRoot> roots;
        for (std::size_t i = 0; i < branches.size(); ++i) {
            if (branches[i].image().contains(z)) {
                roots.push_back({static_cast<int>(i), branches[i].inverse(z),
                                 branches[i].inverse_derivative(z)});
            }
        }
        return roots;
    }

    /// Quantization sets in ascending level order.
    std::vector<QuantizationSet> quantization_preimages() const {
        std::vector<QuantizationSet> out = quant_sets;
        std::sort(out.begin(), out.end(),
                  [](const QuantizationSet& a, const QuantizationSet& b) { return a.level < b.level; });
        return out;
    }
};

struct ValidationIssue {
    std::string kind;      // "overlap", "gap", "roundtrip", "nonmonotone", ...
    double location = 0.0;
    std::string detail;
};

struct ValidationReport {
    bool valid = true;
    std::vector<ValidationIssue> issues;

    void flag(std::string kind, double location, std::string detail) {
        valid = false;
        issues.push_back({std::move(kind), location, std::move(detail)});
    }
};

/// Check the partition/overlap/invertibility hypotheses by deterministic grid
/// probing (1e4 points over the union of domains; unbounded pieces are probed
/// on a finite window).
inline ValidationReport validate(const PiecewiseNonlinearity& nl) {
    ValidationReport report;
    constexpr double kProbeWindow = 100.0;
    constexpr int kTotalProbes = 10000;

    struct Piece {
        double lo, hi;
        bool is_branch;
        std::size_t index;
    };
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i < nl.branches.size(); ++i) {
        const auto& d = nl.branches[i].domain;
        if (!(d.lo < d.hi)) report.flag("empty-domain", d.lo, "branch " + std::to_string(i));
        pieces.push_back({d.lo, d.hi, true, i});
    }
    for (std::size_t j = 0; j < nl.quant_sets.size(); ++j) {
        const auto& q = nl.quant_sets[j];
        if (!(q.lower < q.upper))
            report.flag("empty-quantization-set", q.lower, "set " + std::to_string(j));
        if (!std::isfinite(q.lower) || !std::isfinite(q.upper))
            report.flag("unbounded-quantization-preimage", q.level,
                        "set " + std::to_string(j) + " must cover a bounded interval");
        pieces.push_back({q.lower, q.upper, false, j});
    }
    if (pieces.empty()) {
        report.flag("empty", 0.0, "no pieces");
        return report;
    }

    // Distinct quantization levels.
    for (std::size_t a = 0; a < nl.quant_sets.size(); ++a) {
        for (std::size_t b = a + 1; b < nl.quant_sets.size(); ++b) {
            if (nl.quant_sets[a].level == nl.quant_sets[b].level) {
                report.flag("duplicate-level", nl.quant_sets[a].level,
                            "sets " + std::to_string(a) + " and " + std::to_string(b));
            }
        }
    }

    // Overlap and gap detection on the sorted interval list.
    std::sort(pieces.begin(), pieces.end(),
              [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
        const double end = pieces[k].hi;
        const double next = pieces[k + 1].lo;
        if (next < end) report.flag("overlap", next, "pieces share positive measure");
        if (next > end) report.flag("gap", end, "uncovered interval of positive measure");
    }

    // Per-branch probing: strict monotonicity and inverse round-trip.
    const int per_piece = std::max(16, kTotalProbes / std::max<int>(1, static_cast<int>(
                                                          nl.branches.size())));
    for (std::size_t i = 0; i < nl.branches.size(); ++i) {
        const auto& br = nl.branches[i];
        const double lo = std::isfinite(br.domain.lo) ? br.domain.lo : -kProbeWindow;
        const double hi = std::isfinite(br.domain.hi) ? br.domain.hi : kProbeWindow;
        if (!(lo < hi)) continue;
        const double step = (hi - lo) / (per_piece + 1);
        double prev = br.forward(lo + 0.5 * step);
        const bool inc = br.increasing();
        for (int k = 1; k <= per_piece; ++k) {
            const double r = lo + (k + 0.5) * step;
            if (r >= hi) break;
            const double z = br.forward(r);
            if ((inc && z <= prev) || (!inc && z >= prev)) {
                report.flag("nonmonotone", r, "branch " + std::to_string(i));
                break;
            }
            prev = z;
            const double back = br.inverse(z);
            if (std::abs(back - r) > 1e-10 * (1.0 + std::abs(r))) {
                report.flag("roundtrip", r,
                            "branch " + std::to_string(i) + ": gamma(g(r)) != r");
                break;
            }
            if (!(br.inverse_derivative(z) > 0.0) && z != 0.0) {
                report.flag("vanishing-derivative", r, "branch " + std::to_string(i));
                break;
            }
        }
    }
    return report;
}

/// Simulated data set. Replaying the same seed regenerates the trajectory
/// bit-identically.
struct Trajectory {
    std::vector<Eigen::VectorXd> inputs;   // u_1..u_N
    std::vector<Eigen::VectorXd> states;   // x_1..x_N
    std::vector<double> linear_outputs;    // r_1..r_N
    std::vector<double> noiseless_outputs; // z_1..z_N
    std::vector<double> measurements;      // y_1..y_N
    std::uint64_t seed = 0;

    int horizon() const { return static_cast<int>(measurements.size()); }
};

/// Input description: either a stored sequence or i.i.d. Gaussian per channel.
struct InputSpec {
    std::optional<std::vector<Eigen::VectorXd>> sequence;
    Eigen::VectorXd mean;    // used when sequence is absent
    Eigen::VectorXd stddev;

    static InputSpec iid_gaussian(const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev) {
        InputSpec s;
        s.mean = mean;
        s.stddev = stddev;
        return s;
    }
    static InputSpec fixed(std::vector<Eigen::VectorXd> seq) {
        InputSpec s;
        s.sequence = std::move(seq);
        return s;
    }
};

/// Draw a vector of standard normals for step t from a stream.
inline Eigen::VectorXd normal_vector(const RandomStream& rs, std::uint64_t t, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rs.normal(t, static_cast<std::uint64_t>(i));
    return v;
}

/// Cholesky-like factor that tolerates positive semidefinite input (zero
/// columns along null directions), for sampling noise whose covariance may
/// be singular or zero.
inline Eigen::MatrixXd cholesky_factor_psd(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    if (a.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd::Zero(n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(a));
    Eigen::VectorXd ev = es.eigenvalues();
    const double floor = 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) ev(i) = ev(i) > floor ? std::sqrt(ev(i)) : 0.0;
    return es.eigenvectors() * ev.asDiagonal();
}

/// Simulate N steps of the Wiener system. Deterministic given (seed, spec).
inline Trajectory simulate(const WienerModel& model, const PiecewiseNonlinearity& nl, int horizon,
                           const InputSpec& input, std::uint64_t seed) {
    model.validate();
    if (horizon < 1) throw Error("simulate: horizon must be >= 1");
    const Eigen::Index n = model.state_dim();
    const Eigen::Index m = model.input_dim();

    RandomStream input_stream(seed, stream::kInput);
    RandomStream init_stream(seed, stream::kInitState);
    RandomStream process_stream(seed, stream::kProcessNoise);
    RandomStream linear_stream(seed, stream::kLinearNoise);
    RandomStream output_stream(seed, stream::kOutputNoise);

    const Eigen::MatrixXd l1 = cholesky_factor_psd(model.P1);
    const Eigen::MatrixXd lq = cholesky_factor_psd(model.Q);
    const double sr = std::sqrt(model.R);
    const double sp = std::sqrt(model.P);

    Trajectory traj;
    traj.seed = seed;
    traj.inputs.reserve(horizon);
    traj.states.reserve(horizon);

    Eigen::VectorXd x = model.mu1 + l1 * normal_vector(init_stream, 0, n);
    for (int t = 1; t <= horizon; ++t) {
        Eigen::VectorXd u;
        if (input.sequence) {
            if (static_cast<int>(input.sequence->size()) < horizon)
                throw Error("simulate: stored input sequence shorter than horizon");
            u = (*input.sequence)[t - 1];
        } else {
            u = input.mean + input.stddev.cwiseProduct(
                                 normal_vector(input_stream, static_cast<std::uint64_t>(t), m));
        }
        const double v = sr * linear_stream.normal(static_cast<std::uint64_t>(t), 0);
        const double eta = sp * output_stream.normal(static_cast<std::uint64_t>(t), 0);
        const double r = model.C.dot(x) + model.D.dot(u) + v;
        const double z = nl.evaluate(r);

        traj.inputs.push_back(u);
        traj.states.push_back(x);
        traj.linear_outputs.push_back(r);
        traj.noiseless_outputs.push_back(z);
        traj.measurements.push_back(z + eta);

        x = model.A * x + model.B * u +
            lq * normal_vector(process_stream, static_cast<std::uint64_t>(t), n);
    }
    return traj;
}

} // namespace qgs

#endif // QGS_MODEL_HPP
