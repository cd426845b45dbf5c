#pragma once

// Alternating convex search over (U, lambda) for
//
//     minimize J(U)  s.t.  U in input polytope,
//                          E_r(U) + lambda_r Std_r(U) <= h_r   for every row r,
//                          sum_r 4 / (9 (lambda_r^2 + 1)) <= alpha.
//
// For fixed lambda the problem in U is an SOCP (u_step). For fixed U, the
// lambda update (lambda_step) is a policy choice; see LambdaStepPolicy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vpcc/conic.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/problem.hpp"
#include "vpcc/reformulate.hpp"

namespace vpcc {

enum class LambdaInitPolicy { UniformRisk, UserSupplied };

/// Tight: each lambda set to the largest value the current U satisfies
/// (minimal certified risk). UniformRelax: tight, then every row's risk is
/// scaled up proportionally until the budget alpha is used, which loosens the
/// next U-step while keeping the current U feasible.
enum class LambdaStepPolicy { Tight, UniformRelax };

struct AcsConfig {
    LambdaInitPolicy init_policy = LambdaInitPolicy::UniformRisk;
    std::vector<double> user_lambdas;
    LambdaStepPolicy step_policy = LambdaStepPolicy::UniformRelax;
    int max_outer_iters = 50;
    double convergence_rel_tol = 1e-6;
    SolverOptions inner;
    /// When the initial allocation makes the first U-step infeasible, search
    /// for a certifiable allocation by repeated slack-minimising solves.
    bool rebalance_on_infeasible_start = true;
    int max_rebalance_rounds = 50;

    void validate() const {
        if (!(convergence_rel_tol > 0.0) || !(inner.tol > 0.0)) throw DomainError("tolerances must be positive");
        if (max_outer_iters < 1 || inner.max_iter < 1) throw DomainError("iteration limits must be positive");
    }
};

/// Lambda substituted for an infinite (risk-free) lambda on a row whose spread
/// is zero at the current U but not identically zero.
inline constexpr double kRiskFreeLambda = 1e6;

/// Uniform split of alpha over all rows.
inline RiskAllocation init_lambdas(const JointChanceConstraint& jcc) {
    if (!(jcc.alpha > 0.0) || !(jcc.alpha < kMaxAlpha)) throw DomainError("alpha must lie in (0, 1/6)");
    RiskAllocation alloc;
    const double omega = jcc.alpha / static_cast<double>(jcc.rows.size());
    const double lambda = std::max(risk_to_lambda(omega), kVpLambdaMin + kLambdaMargin);
    for (const auto& r : jcc.rows) {
        alloc.ids.push_back(r.id);
        alloc.lambdas.push_back(lambda);
    }
    return alloc;
}

namespace detail {

inline double usable_lambda(const ReformulatedConstraint& row, double lambda) {
    if (row.moments.deterministic()) return 0.0;
    return std::isinf(lambda) ? kRiskFreeLambda : lambda;
}

inline SocConstraint soc_row(const ReformulatedConstraint& row, double lambda) {
    return {row.moments.a, row.moments.b, usable_lambda(row, lambda), row.moments.L,
            row.moments.v, row.moments.s, row.h};
}

inline double spread_floor(const ReformulatedConstraint& row, double mean) {
    return 1e-12 * std::max({1.0, std::abs(row.h), std::abs(mean)});
}

}  // namespace detail

/// Fixed-lambda SOCP in U.
inline ConicProgram u_step_program(const SystemSpec& spec, const std::vector<ReformulatedConstraint>& rows,
                                   const RiskAllocation& alloc, const QuadraticCost& cost) {
    if (alloc.size() != rows.size()) throw DimensionError("allocation does not match rows");
    cost.validate(spec.horizon(), spec.m());
    ConicProgram prog;
    cost.fill_objective(prog);
    fill_input_polytope(spec, prog);
    for (std::size_t i = 0; i < rows.size(); ++i) prog.soc.push_back(detail::soc_row(rows[i], alloc.lambdas[i]));
    return prog;
}

inline SolverOutcome u_step(const SystemSpec& spec, const std::vector<ReformulatedConstraint>& rows,
                            const RiskAllocation& alloc, const QuadraticCost& cost,
                            const SolverOptions& opts = {}, const ConicBackend& backend = BarrierSolver{}) {
    if (!alloc.lambdas_valid()) throw DomainError("every lambda must exceed sqrt(5/3)");
    return backend.solve(u_step_program(spec, rows, alloc, cost), opts);
}

/// Lambda update for a fixed U. Throws AllocationInfeasible when U cannot be
/// certified within alpha.
inline RiskAllocation lambda_step(const std::vector<ReformulatedConstraint>& rows, const Vector& U,
                                  LambdaStepPolicy policy, double alpha) {
    RiskAllocation alloc;
    std::vector<double> omega(rows.size(), 0.0);
    std::vector<bool> risk_free_spread(rows.size(), false);
    double tight_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        alloc.ids.push_back(row.id);
        const double mu = row.mean(U);
        const double sd = row.stddev(U);
        if (row.moments.deterministic() || sd <= detail::spread_floor(row, mu)) {
            if (mu > row.h + 1e-9 * std::max(1.0, std::abs(row.h)))
                throw AllocationInfeasible("row '" + row.id + "' has no spread and is violated");
            alloc.lambdas.push_back(kInfiniteLambda);
            risk_free_spread[i] = !row.moments.deterministic();
            continue;
        }
        const double lam = std::max((row.h - mu) / sd, kVpLambdaMin + kLambdaMargin);
        alloc.lambdas.push_back(lam);
        omega[i] = vp_bound(lam);
        tight_sum += omega[i];
    }
    if (tight_sum > alpha * (1.0 + 1e-12))
        throw AllocationInfeasible("certifying the current input needs risk " + std::to_string(tight_sum) +
                                   " > alpha " + std::to_string(alpha));
    if (policy == LambdaStepPolicy::Tight || tight_sum <= 0.0) return alloc;

    // rows with zero spread at U but not identically: a tiny finite risk each
    double budget = alpha;
    const double tiny = 1e-9 * alpha / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!risk_free_spread[i]) continue;
        alloc.lambdas[i] = std::min(risk_to_lambda(tiny), kRiskFreeLambda);
        budget -= vp_bound(alloc.lambdas[i]);
    }
    const double scale = budget / tight_sum;
    if (scale <= 1.0) return alloc;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (omega[i] <= 0.0) continue;
        const double relaxed = std::min(omega[i] * scale, kMaxAlpha * (1.0 - 1e-12));
        // lambda may only decrease
        alloc.lambdas[i] = std::min(alloc.lambdas[i], std::max(risk_to_lambda(relaxed), kVpLambdaMin + kLambdaMargin));
    }
    return alloc;
}

namespace detail {

// Minimises the total constraint excess over U for the given allocation, then
// reallocates risk in proportion to what that U needs. Returns true with a
// certifiable allocation in `alloc` on success.
inline bool rebalance_allocation(const SystemSpec& spec, const std::vector<ReformulatedConstraint>& rows,
                                 double alpha, const AcsConfig& cfg, RiskAllocation& alloc, int& rounds) {
    const auto dimU = static_cast<Eigen::Index>(spec.horizon() * spec.m());
    const auto R = static_cast<Eigen::Index>(rows.size());
    double best_total = std::numeric_limits<double>::infinity();
    for (rounds = 1; rounds <= cfg.max_rebalance_rounds; ++rounds) {
        ConicProgram prog;
        prog.P = Matrix::Zero(dimU + R, dimU + R);
        prog.c = Vector::Zero(dimU + R);
        prog.c.tail(R).setOnes();
        ConicProgram poly;
        fill_input_polytope(spec, poly);
        const auto np = poly.A_u.rows();
        prog.A_u = Matrix::Zero(np + R, dimU + R);
        prog.b_u = Vector::Zero(np + R);
        prog.A_u.topLeftCorner(np, dimU) = poly.A_u;
        prog.b_u.head(np) = poly.b_u;
        prog.A_u.bottomRightCorner(R, R) = -Matrix::Identity(R, R);  // excess >= 0
        for (Eigen::Index i = 0; i < R; ++i) {
            auto q = soc_row(rows[static_cast<std::size_t>(i)], alloc.lambdas[static_cast<std::size_t>(i)]);
            Vector a = Vector::Zero(dimU + R);
            a.head(dimU) = q.a;
            a(dimU + i) = -1.0;
            q.a = a;
            if (q.L.cols() > 0) {
                Matrix L = Matrix::Zero(dimU + R, q.L.cols());
                L.topRows(dimU) = q.L;
                q.L = L;
            }
            prog.soc.push_back(std::move(q));
        }
        const auto out = solve(prog, cfg.inner);
        if (out.status != SolverStatus::Optimal) return false;
        const Vector U = out.U.head(dimU);

        // risk that this U needs row by row; uncertifiable rows count as 1/6
        std::vector<double> need(rows.size(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double mu = rows[i].mean(U);
            const double sd = rows[i].stddev(U);
            if (rows[i].moments.deterministic() || sd <= spread_floor(rows[i], mu)) {
                need[i] = mu <= rows[i].h ? 0.0 : kMaxAlpha;
            } else {
                const double lam = (rows[i].h - mu) / sd;
                need[i] = lam > kVpLambdaMin ? vp_bound(lam) : kMaxAlpha;
            }
            total += need[i];
        }
        if (total <= alpha) {
            try {
                alloc = lambda_step(rows, U, cfg.step_policy, alpha);
                return true;
            } catch (const AllocationInfeasible&) {
                return false;
            }
        }
        if (total >= best_total) return false;  // needed risk no longer shrinking
        best_total = total;
        RiskAllocation next = alloc;
        double change = 0.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (need[i] <= 0.0 || rows[i].moments.deterministic()) continue;
            const double om = std::min(need[i] * alpha / total, kMaxAlpha * (1.0 - 1e-12));
            next.lambdas[i] = std::max(risk_to_lambda(om), kVpLambdaMin + kLambdaMargin);
            change = std::max(change, std::abs(next.lambdas[i] - alloc.lambdas[i]) /
                                          std::max(1.0, std::abs(alloc.lambdas[i])));
        }
        if (change <= 1e-9) return false;  // stalled
        alloc = std::move(next);
    }
    return false;
}

}  // namespace detail

/// Alternates u_step and lambda_step until the objective settles.
inline SolveReport run(const SystemSpec& spec, const JointChanceConstraint& jcc, const QuadraticCost& cost,
                       const Attestation& att, const AcsConfig& cfg = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    cfg.validate();
    SolveReport rep;
    rep.method = "proposed";
    rep.alpha = jcc.alpha;

    const auto rows = build_reformulation(spec, jcc, att);
    cost.validate(spec.horizon(), spec.m());

    RiskAllocation alloc;
    if (cfg.init_policy == LambdaInitPolicy::UserSupplied) {
        if (cfg.user_lambdas.size() != rows.size()) throw DimensionError("user lambdas do not match rows");
        for (std::size_t i = 0; i < rows.size(); ++i) alloc.ids.push_back(rows[i].id);
        alloc.lambdas = cfg.user_lambdas;
        if (!alloc.lambdas_valid() || alloc.risk_sum() > jcc.alpha * (1.0 + 1e-12))
            throw DomainError("user-supplied lambdas are not a valid allocation");
    } else {
        alloc = init_lambdas(jcc);
    }

    auto finish = [&](SolveStatus st) {
        rep.status = st;
        if (rep.U.size() > 0) {
            rep.objective = cost.value(rep.U);
            rep.objective_per_step = cost.per_step(rep.U);
            if (rep.allocation.size() == rows.size())
                rep.feasibility = check_feasibility(rows, rep.U, rep.allocation, jcc.alpha, 1e-6);
        }
        rep.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        return rep;
    };

    double best = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= cfg.max_outer_iters; ++it) {
        const auto ti = clock::now();
        SolverOutcome out = u_step(spec, rows, alloc, cost, cfg.inner);
        if (out.status == SolverStatus::Infeasible && it == 1 && cfg.rebalance_on_infeasible_start) {
            int rounds = 0;
            RiskAllocation trial = alloc;
            const bool ok = detail::rebalance_allocation(spec, rows, jcc.alpha, cfg, trial, rounds);
            rep.rebalance_rounds = rounds;
            if (ok) {
                alloc = trial;
                out = u_step(spec, rows, alloc, cost, cfg.inner);
            }
        }
        if (out.status == SolverStatus::Infeasible) {
            rep.failed_iteration = it;
            rep.message = "U-step infeasible at outer iteration " + std::to_string(it) + ": " + out.diagnostic;
            return finish(SolveStatus::Infeasible);
        }
        if (out.status != SolverStatus::Optimal) {
            rep.failed_iteration = it;
            rep.message = std::string("inner solver returned ") + to_string(out.status) + ": " + out.diagnostic;
            return finish(rep.U.size() > 0 ? SolveStatus::IterationLimit : SolveStatus::NumericalFailure);
        }

        RiskAllocation next;
        try {
            next = lambda_step(rows, out.U, cfg.step_policy, jcc.alpha);
        } catch (const AllocationInfeasible& e) {
            rep.failed_iteration = it;
            rep.message = e.what();
            return finish(rep.U.size() > 0 ? SolveStatus::IterationLimit : SolveStatus::AllocationInfeasible);
        }

        const double J = cost.value(out.U);
        AcsIteration rec;
        rec.iteration = it;
        rec.objective = J;
        rec.risk_sum = next.risk_sum();
        rec.lambdas = next.lambdas;
        rec.inner_status = out.status;
        rec.inner_iterations = out.iterations;
        rec.wall_time_ms = std::chrono::duration<double, std::milli>(clock::now() - ti).count();
        rep.trace.push_back(rec);

        if (J < best) {
            best = J;
            rep.U = out.U;
            rep.allocation = next;
        }

        // nothing left to reallocate, or the objective settled
        bool settled = true;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].moments.deterministic()) continue;
            if (next.lambdas[i] != alloc.lambdas[i]) settled = false;
        }
        if (!settled && !std::isnan(prev))
            settled = std::abs(J - prev) <= cfg.convergence_rel_tol * std::max(1.0, std::abs(J));
        if (settled) {
            rep.U = out.U;
            rep.allocation = next;
            return finish(SolveStatus::Optimal);
        }
        prev = J;
        alloc = std::move(next);
    }
    rep.message = "outer iteration limit reached; returning best iterate";
    return finish(SolveStatus::IterationLimit);
}

}  // namespace vpcc
