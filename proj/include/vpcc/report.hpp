#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "vpcc/certify.hpp"
#include "vpcc/config.hpp"
#include "vpcc/conic.hpp"
#include "vpcc/problem.hpp"
#include "vpcc/reformulate.hpp"

namespace vpcc {

namespace detail {

// JSON has no NaN or infinity; those become null.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json numbers_or_null(const std::vector<double>& xs) {
    json out = json::array();
    for (double x : xs) out.push_back(number_or_null(x));
    return out;
}

}  // namespace detail

inline json feasibility_json(const FeasibilityReport& f) {
    json rows = json::array();
    for (const auto& r : f.rows)
        rows.push_back({{"id", r.id},
                        {"mean", r.mean},
                        {"stddev", r.stddev},
                        {"lambda", detail::number_or_null(r.lambda)},
                        {"slack", r.slack},
                        {"risk", r.risk},
                        {"ok", r.ok}});
    return {{"feasible", f.feasible},        {"allocation_valid", f.allocation_valid},
            {"slacks_ok", f.slacks_ok},      {"risk_sum", f.risk_sum},
            {"alpha", f.alpha},              {"rows", std::move(rows)}};
}

inline json certificate_json(const McCertificate& c) {
    return {{"samples", c.samples},
            {"violations", c.violations},
            {"empirical_violation", c.empirical_violation},
            {"upper_ci_99", c.upper_ci_99},
            {"alpha", c.alpha},
            {"certified", c.certified}};
}

/// Full SolveReport; `m` splits U into per-step inputs.
inline json report_json(const SolveReport& r, std::size_t m) {
    json j;
    j["method"] = r.method;
    j["status"] = to_string(r.status);
    j["feasible"] = r.has_solution();
    j["alpha"] = r.alpha;
    j["one_minus_alpha"] = 1.0 - r.alpha;
    j["objective"] = detail::number_or_null(r.objective);
    j["objective_per_step"] = detail::numbers_or_null(r.objective_per_step);
    j["wall_time_ms"] = r.wall_time_ms;
    if (!r.message.empty()) j["message"] = r.message;
    json inputs = json::array();
    if (m > 0)
        for (Eigen::Index k = 0; k + static_cast<Eigen::Index>(m) <= r.U.size(); k += static_cast<Eigen::Index>(m))
            inputs.push_back(vector_json(r.U.segment(k, static_cast<Eigen::Index>(m))));
    j["inputs"] = std::move(inputs);
    if (r.method == "proposed") {
        json alloc = json::array();
        for (std::size_t i = 0; i < r.allocation.size(); ++i)
            alloc.push_back({{"id", r.allocation.ids[i]},
                             {"lambda", detail::number_or_null(r.allocation.lambdas[i])},
                             {"risk", r.allocation.lambdas[i] > kVpLambdaMin ? r.allocation.risk(i) : kMaxAlpha}});
        j["allocation"] = std::move(alloc);
        json trace = json::array();
        for (const auto& t : r.trace)
            trace.push_back({{"iteration", t.iteration},
                             {"objective", t.objective},
                             {"risk_sum", t.risk_sum},
                             {"lambdas", detail::numbers_or_null(t.lambdas)},
                             {"inner_status", to_string(t.inner_status)},
                             {"inner_iterations", t.inner_iterations},
                             {"wall_time_ms", t.wall_time_ms}});
        j["trace"] = std::move(trace);
        j["rebalance_rounds"] = r.rebalance_rounds;
        if (r.failed_iteration > 0) j["failed_iteration"] = r.failed_iteration;
        if (r.feasibility) j["check_feasibility"] = feasibility_json(*r.feasibility);
    }
    if (r.scenario)
        j["scenario"] = {{"sample_count", r.scenario->sample_count},
                         {"constraint_count", r.scenario->constraint_count},
                         {"beta", r.scenario->beta},
                         {"seed", r.scenario->seed},
                         {"note", r.scenario->note}};
    if (r.certificate) j["mc_certificate"] = certificate_json(*r.certificate);
    return j;
}

/// Conic program in plain arrays, for handing to an external solver.
inline json conic_program_json(const ConicProgram& p) {
    json soc = json::array();
    for (const auto& q : p.soc)
        soc.push_back({{"a", vector_json(q.a)},
                       {"b", q.b},
                       {"lambda", q.lambda},
                       {"L", q.L.cols() > 0 ? matrix_json(q.L) : json::array()},
                       {"v", vector_json(q.v)},
                       {"s", q.s},
                       {"h", q.h}});
    return {{"P", matrix_json(p.P)},
            {"c", vector_json(p.c)},
            {"constant", p.constant},
            {"A_u", p.A_u.rows() > 0 ? matrix_json(p.A_u) : json::array()},
            {"b_u", vector_json(p.b_u)},
            {"soc", std::move(soc)}};
}

/// %.17g, or empty for non-finite values.
inline std::string format_g17(double x) {
    if (!std::isfinite(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace vpcc
