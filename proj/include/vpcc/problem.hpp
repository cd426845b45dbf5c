#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vpcc/certify.hpp"
#include "vpcc/conic.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/random_matrix.hpp"
#include "vpcc/reformulate.hpp"

namespace vpcc {

/// J(U) = sum_k u(k)^T Q_k u(k) + c_k^T u(k), k = 0..N-1.
struct QuadraticCost {
    std::vector<Matrix> Q;
    std::vector<Vector> c;

    static QuadraticCost time_invariant(const Matrix& Q, const Vector& c, std::size_t horizon) {
        return {std::vector<Matrix>(horizon, Q), std::vector<Vector>(horizon, c)};
    }

    std::size_t horizon() const { return Q.size(); }

    void validate(std::size_t horizon, std::size_t m) const {
        if (Q.size() != horizon || c.size() != horizon) throw DimensionError("cost must have one term per step");
        for (std::size_t k = 0; k < horizon; ++k) {
            if (static_cast<std::size_t>(Q[k].rows()) != m || static_cast<std::size_t>(Q[k].cols()) != m ||
                static_cast<std::size_t>(c[k].size()) != m)
                throw DimensionError("cost term has wrong dimension");
        }
    }

    std::vector<double> per_step(const Vector& U) const {
        std::vector<double> out(horizon());
        for (std::size_t k = 0; k < horizon(); ++k) {
            const auto m = c[k].size();
            const Vector u = U.segment(static_cast<Eigen::Index>(k) * m, m);
            out[k] = u.dot(Q[k] * u) + c[k].dot(u);
        }
        return out;
    }

    double value(const Vector& U) const {
        double s = 0.0;
        for (double v : per_step(U)) s += v;
        return s;
    }

    /// Fills the objective of a conic program over U: P = 2 blkdiag(Q_k).
    void fill_objective(ConicProgram& prog) const {
        const auto N = static_cast<Eigen::Index>(horizon());
        const auto m = N > 0 ? c.front().size() : 0;
        prog.P = Matrix::Zero(N * m, N * m);
        prog.c = Vector::Zero(N * m);
        prog.constant = 0.0;
        for (Eigen::Index k = 0; k < N; ++k) {
            const auto& q = Q[static_cast<std::size_t>(k)];
            prog.P.block(k * m, k * m, m, m) = q + q.transpose();
            prog.c.segment(k * m, m) = c[static_cast<std::size_t>(k)];
        }
    }
};

/// Input polytope repeated over the horizon, in stacked-U coordinates.
inline void fill_input_polytope(const SystemSpec& spec, ConicProgram& prog) {
    const auto& poly = spec.input_polytope;
    const auto N = static_cast<Eigen::Index>(spec.horizon());
    const auto m = static_cast<Eigen::Index>(spec.m());
    const auto rows = poly.A.rows();
    prog.A_u = Matrix::Zero(N * rows, N * m);
    prog.b_u = Vector::Zero(N * rows);
    for (Eigen::Index k = 0; k < N; ++k) {
        prog.A_u.block(k * rows, k * m, rows, m) = poly.A;
        prog.b_u.segment(k * rows, rows) = poly.b;
    }
}

enum class SolveStatus { Optimal, IterationLimit, Infeasible, AllocationInfeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::IterationLimit: return "IterationLimit";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::AllocationInfeasible: return "AllocationInfeasible";
        case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

/// One outer iteration of the alternating search.
struct AcsIteration {
    int iteration = 0;
    double objective = 0.0;
    double risk_sum = 0.0;
    std::vector<double> lambdas;
    SolverStatus inner_status = SolverStatus::Optimal;
    int inner_iterations = 0;
    double wall_time_ms = 0.0;
};

using AcsTrace = std::vector<AcsIteration>;

struct ScenarioInfo {
    std::size_t sample_count = 0;
    std::size_t constraint_count = 0;  // after exact deduplication
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::string note;
};

/// Result of either solution method.
struct SolveReport {
    std::string method;
    SolveStatus status = SolveStatus::NumericalFailure;
    double alpha = 0.0;
    Vector U;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> objective_per_step;
    double wall_time_ms = 0.0;
    std::string message;

    // proposed method
    RiskAllocation allocation;
    AcsTrace trace;
    int rebalance_rounds = 0;
    int failed_iteration = 0;
    std::optional<FeasibilityReport> feasibility;

    // scenario method
    std::optional<ScenarioInfo> scenario;

    std::optional<McCertificate> certificate;

    /// A usable solution is present. Proposed-method solutions must also pass
    /// their feasibility check.
    bool has_solution() const {
        if (U.size() == 0) return false;
        if (method == "scenario") return status == SolveStatus::Optimal;
        if (status != SolveStatus::Optimal && status != SolveStatus::IterationLimit) return false;
        return feasibility && feasibility->feasible;
    }
};

}  // namespace vpcc
