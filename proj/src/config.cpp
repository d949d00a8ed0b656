#include "ioc/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace ioc {

using nlohmann::json;

namespace {

MatrixXd parse_matrix(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ValidationError(field, "expected a list of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j.front().size());
    MatrixXd M(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw ValidationError(field, "ragged rows");
        for (int c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw ValidationError(field, "non-numeric entry");
            M(r, c) = j[r][c].get<double>();
        }
    }
    return M;
}

VectorXd parse_vector(const json& j, const std::string& field) {
    if (!j.is_array()) throw ValidationError(field, "expected a list");
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError(field, "non-numeric entry");
        v(static_cast<int>(i)) = j[i].get<double>();
    }
    return v;
}

const json& require(const json& j, const std::string& key, const std::string& scope) {
    if (!j.contains(key)) throw ValidationError(scope + "." + key, "missing");
    return j.at(key);
}

json matrix_to_json(const MatrixXd& M) {
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const VectorXd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

}  // namespace

RunConfig parse_config(const json& j) {
    RunConfig cfg;

    const json& sys = require(j, "system", "config");
    cfg.scenario.sys.A = parse_matrix(require(sys, "A", "system"), "system.A");
    cfg.scenario.sys.B = parse_matrix(require(sys, "B", "system"), "system.B");
    const int n = cfg.scenario.sys.n();
    const int m = cfg.scenario.sys.m();
    cfg.scenario.sys.d = sys.contains("d") ? parse_vector(sys.at("d"), "system.d") : VectorXd::Zero(n);
    cfg.scenario.sys.sigma_w = sys.contains("sigma_w")
                                   ? parse_matrix(sys.at("sigma_w"), "system.sigma_w")
                                   : MatrixXd::Zero(n, n);
    cfg.scenario.sys.sigma_v = sys.contains("sigma_v")
                                   ? parse_matrix(sys.at("sigma_v"), "system.sigma_v")
                                   : MatrixXd::Zero(n, n);

    const json& cost = require(j, "cost", "config");
    cfg.scenario.cost.Q = parse_matrix(require(cost, "Q", "cost"), "cost.Q");
    cfg.scenario.cost.q =
        cost.contains("q") ? parse_vector(cost.at("q"), "cost.q") : VectorXd::Zero(n);
    cfg.scenario.cost.R =
        cost.contains("R") ? parse_matrix(cost.at("R"), "cost.R") : MatrixXd::Identity(m, m);

    const json& hor = require(j, "horizon", "config");
    const int nu = require(hor, "nu", "horizon").get<int>();
    if (hor.contains("probs")) {
        cfg.scenario.horizon.nu = nu;
        cfg.scenario.horizon.probs = parse_vector(hor.at("probs"), "horizon.probs");
    } else {
        cfg.scenario.horizon = HorizonDistribution::uniform(nu);
    }

    const json& init = require(j, "init", "config");
    const std::string kind = require(init, "kind", "init").get<std::string>();
    if (kind == "gaussian") {
        cfg.scenario.init = InitialStateDistribution::gaussian(
            parse_vector(require(init, "mean", "init"), "init.mean"),
            parse_matrix(require(init, "cov", "init"), "init.cov"));
    } else if (kind == "mixture") {
        const json& comps = require(init, "components", "init");
        if (!comps.is_array() || comps.empty())
            throw ValidationError("init.components", "expected a non-empty list");
        for (const auto& c : comps) {
            GaussianComponent gc;
            gc.weight = require(c, "weight", "init.components").get<double>();
            gc.mean = parse_vector(require(c, "mean", "init.components"), "init.components.mean");
            gc.cov = parse_matrix(require(c, "cov", "init.components"), "init.components.cov");
            cfg.scenario.init.components.push_back(std::move(gc));
        }
    } else {
        throw ValidationError("init.kind", "expected 'gaussian' or 'mixture'");
    }

    if (j.contains("estimator")) {
        const json& est = j.at("estimator");
        cfg.estimator.phi = est.value("phi", cfg.estimator.phi);
        cfg.estimator.tol.gap = est.value("gap_tol", cfg.estimator.tol.gap);
        cfg.estimator.tol.feas = est.value("feas_tol", cfg.estimator.tol.feas);
        cfg.estimator.max_iter = est.value("max_iter", cfg.estimator.max_iter);
    }
    cfg.seed = j.value("seed", std::uint64_t{0});

    cfg.scenario.validate();
    if (cfg.estimator.phi <= 0) throw ValidationError("estimator.phi", "must be positive");
    return cfg;
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["system"] = {{"A", matrix_to_json(cfg.scenario.sys.A)},
                   {"B", matrix_to_json(cfg.scenario.sys.B)},
                   {"d", vector_to_json(cfg.scenario.sys.d)},
                   {"sigma_w", matrix_to_json(cfg.scenario.sys.sigma_w)},
                   {"sigma_v", matrix_to_json(cfg.scenario.sys.sigma_v)}};
    j["cost"] = {{"Q", matrix_to_json(cfg.scenario.cost.Q)},
                 {"q", vector_to_json(cfg.scenario.cost.q)},
                 {"R", matrix_to_json(cfg.scenario.cost.R)}};
    j["horizon"] = {{"nu", cfg.scenario.horizon.nu},
                    {"probs", vector_to_json(cfg.scenario.horizon.probs)}};
    if (cfg.scenario.init.components.size() == 1) {
        j["init"] = {{"kind", "gaussian"},
                     {"mean", vector_to_json(cfg.scenario.init.components[0].mean)},
                     {"cov", matrix_to_json(cfg.scenario.init.components[0].cov)}};
    } else {
        json comps = json::array();
        for (const auto& c : cfg.scenario.init.components)
            comps.push_back({{"weight", c.weight},
                             {"mean", vector_to_json(c.mean)},
                             {"cov", matrix_to_json(c.cov)}});
        j["init"] = {{"kind", "mixture"}, {"components", std::move(comps)}};
    }
    j["estimator"] = {{"phi", cfg.estimator.phi},
                      {"gap_tol", cfg.estimator.tol.gap},
                      {"feas_tol", cfg.estimator.tol.feas},
                      {"max_iter", cfg.estimator.max_iter}};
    j["seed"] = cfg.seed;
    return j;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw std::runtime_error("load_config: " + path + ": " + ex.what());
    }
    return parse_config(j);
}

}  // namespace ioc
