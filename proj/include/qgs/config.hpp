#ifndef QGS_CONFIG_HPP
#define QGS_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qgs/error.hpp"
#include "qgs/metrics.hpp"
#include "qgs/model.hpp"
#include "qgs/presets.hpp"

namespace qgs {

using nlohmann::json;

/// Everything needed to reproduce one experiment: system, data size, Monte
/// Carlo count, seeds, algorithm settings, grid and output location.
struct ExperimentConfig {
    std::string name = "experiment";
    WienerModel model;
    PiecewiseNonlinearity nonlinearity;
    InputSpec input;
    int horizon = 100;
    int runs = 100;
    std::uint64_t seed = 0;
    int order1 = 10;
    int order2 = -1;  // -1: same as order1
    int max_components = 10;
    int pf_particles = 500;
    int gt_particles = 20000;
    int smoother_trajectories = 2000;
    std::optional<GridSpec> grid;  // absent: auto around the GT moments
    std::vector<int> pdf_times = {25, 50, 75, 100};
    std::vector<std::string> algos = {"qgsf", "qgss", "ekf", "eks", "pf", "ps"};
    std::string out_dir = "out";

    FilterOptions filter_options() const {
        FilterOptions o;
        o.order1 = order1;
        o.order2 = order2;
        o.max_components = max_components;
        return o;
    }
};

namespace detail {

inline void require_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
}

inline double number_or_inf(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw ConfigError("expected number or \"inf\"/\"-inf\" in " + where);
}

inline Eigen::MatrixXd parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected nested array");
    if (!j[0].is_array()) {
        // A flat array is a single row.
        Eigen::MatrixXd m(1, j.size());
        for (std::size_t c = 0; c < j.size(); ++c) m(0, c) = j[c].get<double>();
        return m;
    }
    const std::size_t rows = j.size(), cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw ConfigError(where + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

inline WienerModel parse_model(const json& j) {
    if (j.is_string()) return preset_model(j.get<std::string>());
    require_keys(j, {"A", "B", "C", "D", "Q", "R", "P", "mu1", "P1"}, "model");
    WienerModel m;
    m.A = parse_matrix(j.at("A"), "model.A");
    m.B = parse_matrix(j.at("B"), "model.B");
    m.C = parse_matrix(j.at("C"), "model.C").row(0);
    m.D = parse_matrix(j.at("D"), "model.D").row(0);
    m.Q = parse_matrix(j.at("Q"), "model.Q");
    m.R = j.at("R").get<double>();
    m.P = j.at("P").get<double>();
    m.mu1 = parse_vector(j.at("mu1"), "model.mu1");
    m.P1 = parse_matrix(j.at("P1"), "model.P1");
    m.validate();
    return m;
}

inline MonotoneBranch parse_branch(const json& j) {
    require_keys(j, {"kind", "domain", "a", "b", "power", "table"}, "nonlinearity.branches[]");
    MonotoneBranch br;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "affine") {
        br.kind = MapKind::Affine;
        br.a = j.value("a", 1.0);
        br.b = j.value("b", 0.0);
        if (br.a == 0.0) throw ConfigError("affine branch: slope must be nonzero");
    } else if (kind == "square") {
        br.kind = MapKind::Square;
    } else if (kind == "neg_abs") {
        br.kind = MapKind::NegAbs;
    } else if (kind == "signed_power") {
        br.kind = MapKind::SignedPower;
        br.power = j.at("power").get<double>();
    } else if (kind == "table") {
        br.kind = MapKind::Table;
        for (const auto& knot : j.at("table")) {
            br.table.emplace_back(knot[0].get<double>(), knot[1].get<double>());
        }
        if (br.table.size() < 2) throw ConfigError("table branch: need at least 2 knots");
    } else {
        throw ConfigError("unknown branch kind: " + kind);
    }
    const auto& d = j.at("domain");
    br.domain.lo = number_or_inf(d.at(0), "branch domain");
    br.domain.hi = number_or_inf(d.at(1), "branch domain");
    return br;
}

inline PiecewiseNonlinearity parse_nonlinearity(const json& j) {
    if (j.is_string()) return preset_nonlinearity(j.get<std::string>());
    require_keys(j, {"branches", "quant_sets"}, "nonlinearity");
    PiecewiseNonlinearity nl;
    if (j.contains("branches")) {
        for (const auto& b : j.at("branches")) nl.branches.push_back(parse_branch(b));
    }
    if (j.contains("quant_sets")) {
        for (const auto& q : j.at("quant_sets")) {
            require_keys(q, {"lower", "upper", "level"}, "nonlinearity.quant_sets[]");
            nl.quant_sets.push_back({q.at("lower").get<double>(), q.at("upper").get<double>(),
                                     q.at("level").get<double>()});
        }
    }
    return nl;
}

inline InputSpec parse_input(const json& j, Eigen::Index m) {
    require_keys(j, {"mean", "stddev", "sequence"}, "input");
    if (j.contains("sequence")) {
        std::vector<Eigen::VectorXd> seq;
        for (const auto& row : j.at("sequence")) seq.push_back(parse_vector(row, "input.sequence"));
        return InputSpec::fixed(std::move(seq));
    }
    Eigen::VectorXd mean = j.contains("mean") ? parse_vector(j.at("mean"), "input.mean")
                                              : Eigen::VectorXd::Zero(m).eval();
    Eigen::VectorXd sd = j.contains("stddev") ? parse_vector(j.at("stddev"), "input.stddev")
                                              : Eigen::VectorXd::Ones(m).eval();
    if (mean.size() != m || sd.size() != m)
        throw ConfigError("input: mean/stddev must have one entry per input channel");
    return InputSpec::iid_gaussian(mean, sd);
}

} // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    detail::require_keys(j,
                         {"name", "model", "nonlinearity", "input", "horizon", "runs", "seed",
                          "quadrature", "max_components", "particles", "grid", "pdf_times",
                          "algos", "out_dir"},
                         "config");
    ExperimentConfig cfg;
    cfg.name = j.value("name", std::string("experiment"));
    cfg.model = detail::parse_model(j.at("model"));
    cfg.nonlinearity = detail::parse_nonlinearity(j.at("nonlinearity"));
    cfg.input = j.contains("input") ? detail::parse_input(j.at("input"), cfg.model.input_dim())
                                    : preset_input(cfg.model);
    cfg.horizon = j.value("horizon", 100);
    cfg.runs = j.value("runs", 100);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("quadrature")) {
        detail::require_keys(j.at("quadrature"), {"L1", "L2"}, "quadrature");
        cfg.order1 = j.at("quadrature").value("L1", 10);
        cfg.order2 = j.at("quadrature").value("L2", -1);
    }
    cfg.max_components = j.value("max_components", 10);
    if (j.contains("particles")) {
        detail::require_keys(j.at("particles"), {"pf", "gt", "smoother"}, "particles");
        cfg.pf_particles = j.at("particles").value("pf", 500);
        cfg.gt_particles = j.at("particles").value("gt", 20000);
        cfg.smoother_trajectories = j.at("particles").value("smoother", 2000);
    }
    if (j.contains("grid") && !j.at("grid").is_string()) {
        detail::require_keys(j.at("grid"), {"lo", "hi", "points"}, "grid");
        cfg.grid = GridSpec{j.at("grid").at("lo").get<double>(),
                            j.at("grid").at("hi").get<double>(),
                            j.at("grid").value("points", 400)};
    }
    if (j.contains("pdf_times")) {
        cfg.pdf_times.clear();
        for (const auto& t : j.at("pdf_times")) cfg.pdf_times.push_back(t.get<int>());
    }
    if (j.contains("algos")) {
        cfg.algos.clear();
        for (const auto& a : j.at("algos")) cfg.algos.push_back(a.get<std::string>());
    }
    cfg.out_dir = j.value("out_dir", std::string("out"));
    if (cfg.horizon < 1 || cfg.runs < 1) throw ConfigError("horizon and runs must be >= 1");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

/// Bundled experiment configurations matching the three example systems.
inline ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.model = preset_model(name);
    cfg.nonlinearity = preset_nonlinearity(name);
    cfg.input = preset_input(cfg.model);
    cfg.seed = 20240601;
    return cfg;
}

inline std::vector<std::string> config_preset_names() { return model_preset_names(); }

} // namespace qgs

#endif // QGS_CONFIG_HPP
