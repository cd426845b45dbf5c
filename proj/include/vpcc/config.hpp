#pragma once

// JSON problem configuration ("schema": 1). Matrices are row-major nested
// arrays. A state-matrix entry is either a number or an object
//
//     {"family": "weibull", "scale": 5, "shape": 30, "power": 3}
//     {"family": "beta", "a": 50, "b": 50}
//     {"family": "finite", "values": [...], "probs": [...]}
//     {"family": "constant", "value": 1}
//     {"family": "moments", "raw": [m1, m2, m3, m4]}
//
// Every error is a ConfigError carrying a JSON pointer to the field.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpcc/acs.hpp"
#include "vpcc/distribution.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/problem.hpp"
#include "vpcc/random_matrix.hpp"
#include "vpcc/reformulate.hpp"
#include "vpcc/scenario.hpp"

namespace vpcc {

using json = nlohmann::json;

inline constexpr int kConfigSchema = 1;

/// A constraint row as written in the config; `k` empty means every step 1..N.
struct RowConfig {
    std::string id;
    RowVector G;
    double h = 0.0;
    std::optional<std::size_t> k;
};

struct ScenarioOptions {
    double beta = 0.001;
    std::optional<std::size_t> sample_count;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

struct McOptions {
    std::size_t samples = 100000;
    std::uint64_t seed = 7;
    unsigned threads = 1;
};

struct ProblemConfig {
    std::string name;
    std::size_t horizon = 1;
    Vector x0;
    Matrix B;
    std::vector<RandomMatrixModel> A;  // one model (all k) or one per k
    InputPolytope input_polytope;
    double alpha = 0.05;
    std::vector<RowConfig> rows;
    std::vector<Matrix> Q;  // one (all k) or one per k
    std::vector<Vector> c;
    Attestation attestation;
    AcsConfig acs;
    ScenarioOptions scenario;
    McOptions mc;

    std::size_t n() const { return static_cast<std::size_t>(x0.size()); }
    std::size_t m() const { return static_cast<std::size_t>(B.cols()); }

    SystemSpec system() const {
        SystemSpec s;
        s.A = A.size() == 1 ? std::vector<RandomMatrixModel>(horizon, A.front()) : A;
        s.B = B;
        s.x0 = x0;
        s.input_polytope = input_polytope;
        s.validate();
        return s;
    }

    /// Rows with "all" expanded to one row per step, id "<id>@k<k>".
    JointChanceConstraint constraint(std::optional<double> alpha_override = std::nullopt) const {
        JointChanceConstraint j;
        j.alpha = alpha_override.value_or(alpha);
        for (const auto& r : rows) {
            if (r.k) {
                j.rows.push_back({r.G, r.h, *r.k, r.id});
            } else {
                for (std::size_t k = 1; k <= horizon; ++k)
                    j.rows.push_back({r.G, r.h, k, r.id + "@k" + std::to_string(k)});
            }
        }
        return j;
    }

    QuadraticCost cost() const {
        if (Q.size() == 1) return QuadraticCost::time_invariant(Q.front(), c.front(), horizon);
        return {Q, c};
    }

    ScenarioConfig scenario_config(std::optional<double> alpha_override = std::nullopt) const {
        ScenarioConfig sc;
        sc.alpha = alpha_override.value_or(alpha);
        sc.beta = scenario.beta;
        sc.sample_count = scenario.sample_count;
        sc.seed = scenario.seed;
        sc.threads = scenario.threads;
        sc.inner = acs.inner;
        return sc;
    }
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(child(path, key), "required field is missing");
    return *it;
}

inline const json* optional_field(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline std::uint64_t as_uint(const json& j, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0))
        throw ConfigError(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], child(path, i)));
    return out;
}

inline Vector as_vector(const json& j, const std::string& path, std::optional<std::size_t> len = std::nullopt) {
    const auto v = as_numbers(j, path);
    if (len && v.size() != *len) throw ConfigError(path, "expected " + std::to_string(*len) + " entries");
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix as_matrix(const json& j, const std::string& path, std::optional<std::size_t> rows,
                        std::optional<std::size_t> cols) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
    if (rows && j.size() != *rows) throw ConfigError(path, "expected " + std::to_string(*rows) + " rows");
    const auto first = as_numbers(j[0], child(path, std::size_t{0}));
    const std::size_t nc = cols.value_or(first.size());
    Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(nc));
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto r = as_numbers(j[i], child(path, i));
        if (r.size() != nc) throw ConfigError(child(path, i), "expected " + std::to_string(nc) + " columns");
        for (std::size_t k = 0; k < nc; ++k) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[k];
    }
    return M;
}

inline DistributionSpec parse_distribution(const json& j, const std::string& path) {
    const auto fam = as_string(field(j, "family", path), child(path, "family"));
    int power = 1;
    if (const auto* p = optional_field(j, "power")) power = static_cast<int>(as_uint(*p, child(path, "power")));
    auto num = [&](const char* key) { return as_number(field(j, key, path), child(path, key)); };
    Family f;
    if (fam == "weibull") f = Weibull{num("scale"), num("shape")};
    else if (fam == "beta") f = BetaDist{num("a"), num("b")};
    else if (fam == "constant") f = Constant{num("value")};
    else if (fam == "finite")
        f = FiniteSupport{as_numbers(field(j, "values", path), child(path, "values")),
                          as_numbers(field(j, "probs", path), child(path, "probs"))};
    else if (fam == "moments") f = MomentsOnly{as_numbers(field(j, "raw", path), child(path, "raw"))};
    else throw ConfigError(child(path, "family"), "unknown family '" + fam + "'");
    try {
        return DistributionSpec(std::move(f), power);
    } catch (const DomainError& e) {
        throw ConfigError(path, e.what());
    }
}

inline RandomMatrixModel parse_random_matrix(const json& j, const std::string& path, std::size_t n) {
    if (!j.is_array() || j.size() != n) throw ConfigError(path, "expected " + std::to_string(n) + " rows");
    RandomMatrixModel model(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto rp = child(path, i);
        if (!j[i].is_array() || j[i].size() != n)
            throw ConfigError(rp, "expected " + std::to_string(n) + " columns");
        for (std::size_t k = 0; k < n; ++k) {
            const auto ep = child(rp, k);
            const auto& e = j[i][k];
            try {
                if (e.is_number()) model.set(i, k, RandomEntry(e.get<double>()));
                else if (e.is_object()) model.set(i, k, RandomEntry(parse_distribution(e, ep)));
                else throw ConfigError(ep, "expected a number or a distribution object");
            } catch (const DomainError& err) {
                throw ConfigError(ep, err.what());
            }
        }
    }
    return model;
}

// A single matrix or a list of `horizon` matrices.
inline bool is_matrix_list(const json& j) {
    return j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
}

inline json distribution_json(const DistributionSpec& d) {
    json out = std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, Constant>) return {{"family", "constant"}, {"value", f.value}};
            else if constexpr (std::is_same_v<T, Weibull>)
                return {{"family", "weibull"}, {"scale", f.scale}, {"shape", f.shape}};
            else if constexpr (std::is_same_v<T, BetaDist>) return {{"family", "beta"}, {"a", f.a}, {"b", f.b}};
            else if constexpr (std::is_same_v<T, MomentsOnly>) return {{"family", "moments"}, {"raw", f.raw}};
            else return {{"family", "finite"}, {"values", f.values}, {"probs", f.probs}};
        },
        d.family);
    if (d.power != 1) out["power"] = d.power;
    return out;
}

}  // namespace detail

inline json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline json vector_json(const Eigen::Ref<const Vector>& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline json random_matrix_json(const RandomMatrixModel& model) {
    json rows = json::array();
    for (std::size_t i = 0; i < model.dim(); ++i) {
        json r = json::array();
        for (std::size_t k = 0; k < model.dim(); ++k) {
            const auto& e = model.entry(i, k);
            if (e.deterministic()) r.push_back(e.mean());
            else r.push_back(detail::distribution_json(e.distribution()));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline ProblemConfig parse_config(const json& root) {
    using namespace detail;
    ProblemConfig cfg;
    if (!root.is_object()) throw ConfigError("", "config must be a JSON object");
    const auto schema = as_uint(field(root, "schema", ""), "/schema");
    if (schema != kConfigSchema) throw ConfigError("/schema", "unsupported schema version " + std::to_string(schema));
    if (const auto* nm = optional_field(root, "name")) cfg.name = as_string(*nm, "/name");

    const std::string sp = "/system";
    const auto& sys = field(root, "system", "");
    const auto n = static_cast<std::size_t>(as_uint(field(sys, "n", sp), sp + "/n"));
    const auto m = static_cast<std::size_t>(as_uint(field(sys, "m", sp), sp + "/m"));
    cfg.horizon = static_cast<std::size_t>(as_uint(field(sys, "horizon", sp), sp + "/horizon"));
    if (n == 0) throw ConfigError(sp + "/n", "must be positive");
    if (m == 0) throw ConfigError(sp + "/m", "must be positive");
    if (cfg.horizon == 0) throw ConfigError(sp + "/horizon", "must be positive");
    cfg.x0 = as_vector(field(sys, "x0", sp), sp + "/x0", n);
    cfg.B = as_matrix(field(sys, "B", sp), sp + "/B", n, m);
    const auto& a = field(sys, "A", sp);
    if (is_matrix_list(a)) {
        if (a.size() != cfg.horizon) throw ConfigError(sp + "/A", "a per-step list needs one matrix per step");
        for (std::size_t k = 0; k < a.size(); ++k) cfg.A.push_back(parse_random_matrix(a[k], child(sp + "/A", k), n));
    } else {
        cfg.A.push_back(parse_random_matrix(a, sp + "/A", n));
    }

    if (const auto* poly = optional_field(root, "input_polytope")) {
        const std::string pp = "/input_polytope";
        cfg.input_polytope.A = as_matrix(field(*poly, "A", pp), pp + "/A", std::nullopt, m);
        cfg.input_polytope.b = as_vector(field(*poly, "b", pp), pp + "/b",
                                         static_cast<std::size_t>(cfg.input_polytope.A.rows()));
    }

    const std::string cp = "/chance_constraint";
    const auto& cc = field(root, "chance_constraint", "");
    cfg.alpha = as_number(field(cc, "alpha", cp), cp + "/alpha");
    if (!(cfg.alpha > 0.0) || !(cfg.alpha < kMaxAlpha))
        throw ConfigError(cp + "/alpha", "alpha must lie in (0, 1/6): the bound needs lambda > sqrt(5/3)");
    const auto& rows = field(cc, "rows", cp);
    if (!rows.is_array() || rows.empty()) throw ConfigError(cp + "/rows", "expected a non-empty array");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto rp = child(cp + "/rows", i);
        RowConfig r;
        r.id = as_string(field(rows[i], "id", rp), rp + "/id");
        r.G = as_vector(field(rows[i], "G", rp), rp + "/G", n).transpose();
        r.h = as_number(field(rows[i], "h", rp), rp + "/h");
        const auto& k = field(rows[i], "k", rp);
        if (k.is_string()) {
            if (k.get<std::string>() != "all") throw ConfigError(rp + "/k", "expected a step index or \"all\"");
        } else {
            r.k = static_cast<std::size_t>(as_uint(k, rp + "/k"));
            if (*r.k < 1 || *r.k > cfg.horizon) throw ConfigError(rp + "/k", "step must lie in [1, horizon]");
        }
        cfg.rows.push_back(std::move(r));
    }

    const std::string cop = "/cost";
    const auto& cost = field(root, "cost", "");
    const auto& Qj = field(cost, "Q", cop);
    const auto& cj = field(cost, "c", cop);
    if (is_matrix_list(Qj)) {
        if (Qj.size() != cfg.horizon) throw ConfigError(cop + "/Q", "a per-step list needs one matrix per step");
        for (std::size_t k = 0; k < Qj.size(); ++k) cfg.Q.push_back(as_matrix(Qj[k], child(cop + "/Q", k), m, m));
        if (!cj.is_array() || cj.size() != cfg.horizon || !cj[0].is_array())
            throw ConfigError(cop + "/c", "a per-step Q needs a per-step c");
        for (std::size_t k = 0; k < cj.size(); ++k) cfg.c.push_back(as_vector(cj[k], child(cop + "/c", k), m));
    } else {
        cfg.Q.push_back(as_matrix(Qj, cop + "/Q", m, m));
        cfg.c.push_back(as_vector(cj, cop + "/c", m));
    }

    const std::string ap = "/assumptions";
    if (const auto* as = optional_field(root, "assumptions")) {
        auto attested = [&](const char* key) {
            const auto* v = optional_field(*as, key);
            if (!v) return false;
            if (v->is_boolean()) return v->get<bool>();
            const auto s = as_string(*v, child(ap, key));
            if (s != "attested" && s != "not_attested")
                throw ConfigError(child(ap, key), "expected \"attested\" or \"not_attested\"");
            return s == "attested";
        };
        cfg.attestation.independence = attested("independence");
        cfg.attestation.unimodal = attested("unimodal");
    }

    if (const auto* opts = optional_field(root, "options")) {
        const std::string op = "/options";
        if (const auto* acs = optional_field(*opts, "acs")) {
            const std::string p = op + "/acs";
            auto& a2 = cfg.acs;
            if (const auto* v = optional_field(*acs, "init")) {
                const auto s = as_string(*v, p + "/init");
                if (s == "uniform_risk") a2.init_policy = LambdaInitPolicy::UniformRisk;
                else if (s == "user") a2.init_policy = LambdaInitPolicy::UserSupplied;
                else throw ConfigError(p + "/init", "expected \"uniform_risk\" or \"user\"");
            }
            if (const auto* v = optional_field(*acs, "lambdas")) a2.user_lambdas = as_numbers(*v, p + "/lambdas");
            if (const auto* v = optional_field(*acs, "step")) {
                const auto s = as_string(*v, p + "/step");
                if (s == "tight") a2.step_policy = LambdaStepPolicy::Tight;
                else if (s == "uniform_relax") a2.step_policy = LambdaStepPolicy::UniformRelax;
                else throw ConfigError(p + "/step", "expected \"tight\" or \"uniform_relax\"");
            }
            if (const auto* v = optional_field(*acs, "max_outer_iters"))
                a2.max_outer_iters = static_cast<int>(as_uint(*v, p + "/max_outer_iters"));
            if (const auto* v = optional_field(*acs, "rel_tol")) a2.convergence_rel_tol = as_number(*v, p + "/rel_tol");
            if (const auto* v = optional_field(*acs, "inner_tol")) a2.inner.tol = as_number(*v, p + "/inner_tol");
            if (const auto* v = optional_field(*acs, "inner_max_iter"))
                a2.inner.max_iter = static_cast<int>(as_uint(*v, p + "/inner_max_iter"));
            if (const auto* v = optional_field(*acs, "rebalance"))
                a2.rebalance_on_infeasible_start = as_bool(*v, p + "/rebalance");
            try {
                a2.validate();
            } catch (const DomainError& e) {
                throw ConfigError(p, e.what());
            }
        }
        if (const auto* sc = optional_field(*opts, "scenario")) {
            const std::string p = op + "/scenario";
            if (const auto* v = optional_field(*sc, "beta")) {
                cfg.scenario.beta = as_number(*v, p + "/beta");
                if (!(cfg.scenario.beta > 0.0) || !(cfg.scenario.beta < 1.0))
                    throw ConfigError(p + "/beta", "beta must lie in (0, 1)");
            }
            if (const auto* v = optional_field(*sc, "sample_count"); v && !v->is_null()) {
                cfg.scenario.sample_count = static_cast<std::size_t>(as_uint(*v, p + "/sample_count"));
                if (*cfg.scenario.sample_count == 0) throw ConfigError(p + "/sample_count", "must be positive");
            }
            if (const auto* v = optional_field(*sc, "seed")) cfg.scenario.seed = as_uint(*v, p + "/seed");
            if (const auto* v = optional_field(*sc, "threads"))
                cfg.scenario.threads = static_cast<unsigned>(as_uint(*v, p + "/threads"));
        }
        if (const auto* mc = optional_field(*opts, "mc")) {
            const std::string p = op + "/mc";
            if (const auto* v = optional_field(*mc, "samples")) {
                cfg.mc.samples = static_cast<std::size_t>(as_uint(*v, p + "/samples"));
                if (cfg.mc.samples == 0) throw ConfigError(p + "/samples", "must be positive");
            }
            if (const auto* v = optional_field(*mc, "seed")) cfg.mc.seed = as_uint(*v, p + "/seed");
            if (const auto* v = optional_field(*mc, "threads"))
                cfg.mc.threads = static_cast<unsigned>(as_uint(*v, p + "/threads"));
        }
    }

    try {
        (void)cfg.system();
    } catch (const DimensionError& e) {
        throw ConfigError("/system", e.what());
    }
    return cfg;
}

/// Parses JSON text; syntax errors report the line.
inline ProblemConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("", "JSON syntax error at line " + std::to_string(line) + ": " + e.what());
    }
    return parse_config(root);
}

inline ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline json to_json(const ProblemConfig& cfg) {
    json j;
    j["schema"] = kConfigSchema;
    if (!cfg.name.empty()) j["name"] = cfg.name;
    json sys;
    sys["n"] = cfg.n();
    sys["m"] = cfg.m();
    sys["horizon"] = cfg.horizon;
    sys["x0"] = vector_json(cfg.x0);
    sys["B"] = matrix_json(cfg.B);
    if (cfg.A.size() == 1) {
        sys["A"] = random_matrix_json(cfg.A.front());
    } else {
        sys["A"] = json::array();
        for (const auto& a : cfg.A) sys["A"].push_back(random_matrix_json(a));
    }
    j["system"] = std::move(sys);
    if (cfg.input_polytope.A.size() > 0)
        j["input_polytope"] = {{"A", matrix_json(cfg.input_polytope.A)}, {"b", vector_json(cfg.input_polytope.b)}};
    json rows = json::array();
    for (const auto& r : cfg.rows) {
        json row = {{"id", r.id}, {"G", vector_json(r.G.transpose())}, {"h", r.h}};
        if (r.k) row["k"] = *r.k;
        else row["k"] = "all";
        rows.push_back(std::move(row));
    }
    j["chance_constraint"] = {{"alpha", cfg.alpha}, {"rows", std::move(rows)}};
    if (cfg.Q.size() == 1) {
        j["cost"] = {{"Q", matrix_json(cfg.Q.front())}, {"c", vector_json(cfg.c.front())}};
    } else {
        json Q = json::array(), c = json::array();
        for (const auto& q : cfg.Q) Q.push_back(matrix_json(q));
        for (const auto& v : cfg.c) c.push_back(vector_json(v));
        j["cost"] = {{"Q", std::move(Q)}, {"c", std::move(c)}};
    }
    j["assumptions"] = {{"independence", cfg.attestation.independence ? "attested" : "not_attested"},
                        {"unimodal", cfg.attestation.unimodal ? "attested" : "not_attested"}};
    json acs = {{"init", cfg.acs.init_policy == LambdaInitPolicy::UniformRisk ? "uniform_risk" : "user"},
                {"step", cfg.acs.step_policy == LambdaStepPolicy::Tight ? "tight" : "uniform_relax"},
                {"max_outer_iters", cfg.acs.max_outer_iters},
                {"rel_tol", cfg.acs.convergence_rel_tol},
                {"inner_tol", cfg.acs.inner.tol},
                {"inner_max_iter", cfg.acs.inner.max_iter},
                {"rebalance", cfg.acs.rebalance_on_infeasible_start}};
    if (!cfg.acs.user_lambdas.empty()) acs["lambdas"] = cfg.acs.user_lambdas;
    json sc = {{"beta", cfg.scenario.beta}, {"seed", cfg.scenario.seed}, {"threads", cfg.scenario.threads}};
    if (cfg.scenario.sample_count) sc["sample_count"] = *cfg.scenario.sample_count;
    j["options"] = {{"acs", std::move(acs)},
                    {"scenario", std::move(sc)},
                    {"mc", {{"samples", cfg.mc.samples}, {"seed", cfg.mc.seed}, {"threads", cfg.mc.threads}}}};
    return j;
}

}  // namespace vpcc
