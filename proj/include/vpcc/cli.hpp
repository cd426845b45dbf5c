#pragma once

// Command implementations behind the `vpcc` executable.
//
//   vpcc solve    CONFIG --method proposed|scenario --out DIR
//   vpcc sweep    CONFIG --grid 0.84:0.99:0.01 --methods both --out DIR [--jobs J]
//   vpcc moments  CONFIG --row I [--time K] [--U u1,u2,... | --u u1,...]
//   vpcc validate CONFIG [--report FILE] [--samples S]
//
// Exit codes: 0 success, 2 infeasible (or not certified), 1 error.
// VPCC_SEED overrides the scenario and Monte-Carlo seeds of the config.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpcc/acs.hpp"
#include "vpcc/certify.hpp"
#include "vpcc/config.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/moments.hpp"
#include "vpcc/problem.hpp"
#include "vpcc/reformulate.hpp"
#include "vpcc/report.hpp"
#include "vpcc/scenario.hpp"

namespace vpcc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInfeasible = 2;

inline const char* kSweepHeader =
    "one_minus_alpha,method,feasible,objective,objective_per_step,wall_time_ms,mc_upper_ci,status";

/// Loads a config and applies the VPCC_SEED override.
inline ProblemConfig load(const std::string& path) {
    auto cfg = load_config(path);
    if (const char* s = std::getenv("VPCC_SEED"); s && *s) {
        char* end = nullptr;
        const auto v = std::strtoull(s, &end, 10);
        if (end == s || *end != '\0') throw ConfigError("", "VPCC_SEED must be a non-negative integer");
        cfg.scenario.seed = v;
        cfg.mc.seed = v;
    }
    return cfg;
}

/// Runs one method at risk level alpha. Proposed-method solutions are
/// Monte-Carlo certified when `certify` is set.
inline SolveReport solve_point(const ProblemConfig& cfg, const std::string& method, double alpha, bool certify) {
    const auto spec = cfg.system();
    const auto jcc = cfg.constraint(alpha);
    const auto cost = cfg.cost();
    SolveReport rep;
    if (method == "proposed") {
        if (!(alpha < kMaxAlpha))
            throw DomainError("alpha >= 1/6 cannot be certified: the bound needs lambda > sqrt(5/3)");
        rep = run(spec, jcc, cost, cfg.attestation, cfg.acs);
        if (certify && rep.has_solution())
            rep.certificate = mc_certify(spec, jcc, rep.U, cfg.mc.samples, cfg.mc.seed, cfg.mc.threads);
    } else if (method == "scenario") {
        rep = solve_scenario(spec, jcc, cost, cfg.scenario_config(alpha));
    } else {
        throw DomainError("unknown method '" + method + "'");
    }
    return rep;
}

inline int exit_code(const SolveReport& r) {
    if (r.has_solution()) return kExitOk;
    if (r.status == SolveStatus::Infeasible || r.status == SolveStatus::AllocationInfeasible) return kExitInfeasible;
    return kExitError;
}

inline void write_json(const std::filesystem::path& file, const json& j) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error("cannot write '" + file.string() + "'");
    out << j.dump(2) << '\n';
}

inline int cmd_solve(const std::string& config, const std::string& method, const std::string& out_dir,
                     bool certify, std::ostream& out) {
    const auto cfg = load(config);
    const auto rep = solve_point(cfg, method, cfg.alpha, certify);
    write_json(std::filesystem::path(out_dir) / "report.json", report_json(rep, cfg.m()));
    out << method << ": " << to_string(rep.status);
    if (rep.has_solution()) out << ", objective " << format_g17(rep.objective);
    if (!rep.message.empty()) out << " (" << rep.message << ")";
    out << '\n';
    return exit_code(rep);
}

/// "lo:hi:step" inclusive, or a single value.
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw DomainError("grid entry '" + tok + "' is not a number");
        }
    }
    if (parts.size() == 1) parts = {parts[0], parts[0], 1.0};
    if (parts.size() != 3) throw DomainError("grid must be 'lo:hi:step' or a single value");
    const double lo = parts[0], hi = parts[1], step = parts[2];
    if (!(step > 0.0) || hi < lo) throw DomainError("grid needs lo <= hi and step > 0");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid;
    for (std::size_t i = 0; i < count; ++i) {
        const double p = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
        if (!(p > 0.0) || !(p < 1.0)) throw DomainError("grid values must lie in (0, 1)");
        grid.push_back(p);
    }
    return grid;
}

struct SweepRow {
    double one_minus_alpha = 0.0;
    std::string method;
    bool feasible = false;
    double objective = std::nan("");
    double objective_per_step = std::nan("");
    double wall_time_ms = std::nan("");
    double mc_upper_ci = std::nan("");
    std::string status;
    std::string message;
};

inline std::string csv_line(const SweepRow& r) {
    std::string s = format_g17(r.one_minus_alpha) + "," + r.method + "," + (r.feasible ? "true" : "false") + ",";
    s += format_g17(r.objective) + "," + format_g17(r.objective_per_step) + "," + format_g17(r.wall_time_ms) + ",";
    s += format_g17(r.mc_upper_ci) + "," + r.status;
    return s;
}

inline std::string point_label(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p);
    return buf;
}

/// Runs every (point, method) pair; rows come back in grid order.
inline std::vector<SweepRow> run_sweep(const ProblemConfig& cfg, const std::vector<double>& grid,
                                       const std::vector<std::string>& methods, unsigned jobs,
                                       const std::optional<std::filesystem::path>& report_dir) {
    struct Task {
        double p;
        std::string method;
    };
    std::vector<Task> tasks;
    for (double p : grid)
        for (const auto& m : methods) tasks.push_back({p, m});
    std::vector<SweepRow> rows(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& t = tasks[i];
            SweepRow row;
            row.one_minus_alpha = t.p;
            row.method = t.method;
            try {
                const double alpha = std::round((1.0 - t.p) * 1e12) / 1e12;
                const auto rep = solve_point(cfg, t.method, alpha, true);
                row.feasible = rep.has_solution();
                row.status = to_string(rep.status);
                row.message = rep.message;
                row.wall_time_ms = rep.wall_time_ms;
                if (row.feasible) {
                    row.objective = rep.objective;
                    row.objective_per_step = rep.objective / static_cast<double>(cfg.horizon);
                }
                if (rep.certificate) row.mc_upper_ci = rep.certificate->upper_ci_99;
                if (report_dir)
                    write_json(*report_dir / (t.method + "_" + point_label(t.p) + ".json"),
                               report_json(rep, cfg.m()));
            } catch (const std::exception& e) {
                row.status = "Error";
                row.message = e.what();
            }
            rows[i] = std::move(row);
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return rows;
}

inline int cmd_sweep(const std::string& config, const std::string& grid_text, const std::string& methods_text,
                     const std::string& out_dir, unsigned jobs, std::ostream& out) {
    const auto cfg = load(config);
    const auto grid = parse_grid(grid_text);
    std::vector<std::string> methods;
    if (methods_text == "both") methods = {"proposed", "scenario"};
    else if (methods_text == "proposed" || methods_text == "scenario") methods = {methods_text};
    else throw DomainError("methods must be proposed, scenario or both");

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const auto rows = run_sweep(cfg, grid, methods, jobs, dir / "reports");
    std::ofstream csv(dir / "sweep.csv", std::ios::binary);
    std::ofstream log(dir / "sweep.log", std::ios::binary);
    csv << kSweepHeader << '\n';
    for (const auto& r : rows) {
        csv << csv_line(r) << '\n';
        log << point_label(r.one_minus_alpha) << ' ' << r.method << ' ' << r.status;
        if (!r.message.empty()) log << ": " << r.message;
        log << '\n';
    }
    std::size_t errors = 0;
    for (const auto& r : rows) errors += r.status == "Error";
    out << "wrote " << rows.size() << " rows to " << (dir / "sweep.csv").string();
    if (errors) out << " (" << errors << " failed, see sweep.log)";
    out << '\n';
    return kExitOk;
}

inline Vector parse_list(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw DomainError("'" + tok + "' is not a number");
        }
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Prints the moment coefficients of one row as JSON. `row` is 1-based.
inline int cmd_moments(const std::string& config, std::size_t row, std::optional<std::size_t> time,
                       const std::string& U_text, const std::string& u_text, std::ostream& out) {
    const auto cfg = load(config);
    if (row < 1 || row > cfg.rows.size())
        throw DimensionError("row must lie in [1, " + std::to_string(cfg.rows.size()) + "]");
    const auto& rc = cfg.rows[row - 1];
    std::size_t k = 0;
    if (rc.k) {
        if (time && *time != *rc.k)
            throw DimensionError("row '" + rc.id + "' is defined at step " + std::to_string(*rc.k) + " only");
        k = *rc.k;
    } else {
        if (!time) throw DimensionError("row '" + rc.id + "' applies at every step; pass --time");
        k = *time;
    }
    if (k < 1 || k > cfg.horizon) throw DimensionError("time must lie in [1, " + std::to_string(cfg.horizon) + "]");

    const auto spec = cfg.system();
    const auto dim = static_cast<Eigen::Index>(cfg.horizon * cfg.m());
    Vector U = Vector::Zero(dim);
    if (!U_text.empty()) {
        U = parse_list(U_text);
        if (U.size() != dim) throw DimensionError("--U needs " + std::to_string(dim) + " values");
    } else if (!u_text.empty()) {
        const Vector u = parse_list(u_text);
        if (u.size() != static_cast<Eigen::Index>(cfg.m()))
            throw DimensionError("--u needs " + std::to_string(cfg.m()) + " values");
        for (std::size_t t = 0; t < cfg.horizon; ++t) U.segment(static_cast<Eigen::Index>(t * cfg.m()), u.size()) = u;
    }
    const auto cm = constraint_moments(spec, rc.G, k);
    json j = {{"row", rc.id},
              {"time", k},
              {"mean_affine", {{"a", vector_json(cm.a)}, {"b", cm.b}}},
              {"var_quadratic", {{"Q", cm.Q.size() ? matrix_json(cm.Q) : json::array()},
                                 {"q", vector_json(cm.q)},
                                 {"r", cm.r}}},
              {"U", vector_json(U)},
              {"mean", cm.mean(U)},
              {"variance", cm.variance(U)},
              {"stddev", cm.stddev(U)}};
    out << j.dump(2) << '\n';
    return kExitOk;
}

/// Monte-Carlo certification plus the deterministic feasibility check of a
/// proposed-method report. Solves first when no report is given.
inline int cmd_validate(const std::string& config, const std::string& report_path, std::optional<std::size_t> samples,
                        std::ostream& out) {
    const auto cfg = load(config);
    const auto spec = cfg.system();
    const auto n_samples = samples.value_or(cfg.mc.samples);
    Vector U;
    double alpha = cfg.alpha;
    std::optional<RiskAllocation> alloc;
    if (report_path.empty()) {
        const auto rep = solve_point(cfg, "proposed", cfg.alpha, false);
        if (!rep.has_solution()) {
            out << "proposed: " << to_string(rep.status) << ", nothing to validate\n";
            return exit_code(rep);
        }
        U = rep.U;
        alloc = rep.allocation;
    } else {
        std::ifstream in(report_path);
        if (!in) throw Error("cannot open report '" + report_path + "'");
        const json rep = json::parse(in);
        std::vector<double> u;
        for (const auto& step : rep.at("inputs"))
            for (const auto& x : step) u.push_back(x.get<double>());
        U = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
        alpha = rep.at("alpha").get<double>();
        if (rep.contains("allocation")) {
            RiskAllocation a;
            for (const auto& e : rep.at("allocation")) {
                a.ids.push_back(e.at("id").get<std::string>());
                a.lambdas.push_back(e.at("lambda").is_null() ? kInfiniteLambda : e.at("lambda").get<double>());
            }
            alloc = a;
        }
    }
    if (U.size() == 0) {
        out << "report carries no input sequence\n";
        return kExitInfeasible;
    }
    const auto jcc = cfg.constraint(alpha);
    const auto cert = mc_certify(spec, jcc, U, n_samples, cfg.mc.seed, cfg.mc.threads);
    json j = {{"mc_certificate", certificate_json(cert)}};
    bool ok = cert.certified;
    if (alloc) {
        const auto rows = build_reformulation(spec, jcc, cfg.attestation);
        const auto f = check_feasibility(rows, U, *alloc, alpha, 1e-6);
        j["check_feasibility"] = feasibility_json(f);
        ok = ok && f.feasible;
    }
    out << j.dump(2) << '\n';
    return ok ? kExitOk : kExitInfeasible;
}

/// Parses argv and dispatches. Errors go to `err` with exit code 1.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Chance-constrained open-loop control with random state matrices"};
    app.require_subcommand(1);

    std::string config, method = "proposed", out_dir = ".", grid = "0.84:0.99:0.01", methods = "both";
    std::string report, U_text, u_text;
    unsigned jobs = 1;
    std::size_t row = 0, time = 0, samples = 0;
    bool no_certify = false;

    auto* solve = app.add_subcommand("solve", "Solve one problem and write report.json");
    solve->add_option("config", config, "Problem config (JSON)")->required();
    solve->add_option("--method", method, "proposed or scenario")->check(CLI::IsMember({"proposed", "scenario"}));
    solve->add_option("--out", out_dir, "Output directory");
    solve->add_flag("--no-certify", no_certify, "Skip Monte-Carlo certification");

    auto* sweep = app.add_subcommand("sweep", "Solve over a grid of 1 - alpha values and write sweep.csv");
    sweep->add_option("config", config, "Problem config (JSON)")->required();
    sweep->add_option("--grid", grid, "lo:hi:step over 1 - alpha");
    sweep->add_option("--methods", methods, "proposed, scenario or both")
        ->check(CLI::IsMember({"proposed", "scenario", "both"}));
    sweep->add_option("--out", out_dir, "Output directory");
    sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* moments = app.add_subcommand("moments", "Print mean and variance coefficients of one constraint row");
    moments->add_option("config", config, "Problem config (JSON)")->required();
    moments->add_option("--row", row, "Row index (1-based)")->required();
    auto* time_opt = moments->add_option("--time", time, "Time step k");
    moments->add_option("--U", U_text, "Stacked input sequence, comma separated");
    moments->add_option("--u", u_text, "Per-step input repeated over the horizon, comma separated");

    auto* validate = app.add_subcommand("validate", "Monte-Carlo certification of a solution");
    validate->add_option("config", config, "Problem config (JSON)")->required();
    validate->add_option("--report", report, "report.json from a proposed solve");
    auto* samples_opt = validate->add_option("--samples", samples, "Number of trajectories");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitError;
    }
    try {
        if (*solve) return cmd_solve(config, method, out_dir, !no_certify, out);
        if (*sweep) return cmd_sweep(config, grid, methods, out_dir, jobs, out);
        if (*moments)
            return cmd_moments(config, row, time_opt->count() ? std::optional<std::size_t>(time) : std::nullopt,
                               U_text, u_text, out);
        if (*validate)
            return cmd_validate(config, report,
                                samples_opt->count() ? std::optional<std::size_t>(samples) : std::nullopt, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace vpcc::cli
