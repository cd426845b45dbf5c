#pragma once

// Deterministic reformulation of a joint polytopic chance constraint
//
//     P{ G_ik x(k) <= h_ik for all rows (i, k) } >= 1 - alpha
//
// Boole's inequality splits the joint violation probability over the rows;
// the one-sided Vysochanskij-Petunin bound turns each row into
//
//     E[G x(k)] + lambda * Std[G x(k)] <= h,   risk 4 / (9 (lambda^2 + 1)),
//
// and the row risks must sum to at most alpha. Each row margin must be
// unimodal; that property is attested by the caller, never checked here.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "vpcc/errors.hpp"
#include "vpcc/moments.hpp"
#include "vpcc/random_matrix.hpp"

namespace vpcc {

/// Smallest admissible lambda (exclusive): sqrt(5/3).
inline const double kVpLambdaMin = std::sqrt(5.0 / 3.0);
/// Allocations built by this library keep lambda at least this far above kVpLambdaMin.
inline constexpr double kLambdaMargin = 1e-9;
/// Largest alpha the bound can certify (exclusive).
inline constexpr double kMaxAlpha = 1.0 / 6.0;

inline constexpr double kInfiniteLambda = std::numeric_limits<double>::infinity();

/// One-sided VP tail bound 4 / (9 (lambda^2 + 1)) for lambda > sqrt(5/3).
inline double vp_bound(double lambda) {
    if (!(lambda > kVpLambdaMin))
        throw DomainError("VP bound requires lambda > sqrt(5/3)");
    if (std::isinf(lambda)) return 0.0;
    return 4.0 / (9.0 * (lambda * lambda + 1.0));
}

/// Inverse of vp_bound on (0, 1/6).
inline double risk_to_lambda(double omega) {
    if (!(omega > 0.0) || !(omega < kMaxAlpha))
        throw DomainError("risk must lie in (0, 1/6)");
    return std::sqrt(4.0 / (9.0 * omega) - 1.0);
}

struct ConstraintRow {
    RowVector G;
    double h = 0.0;
    std::size_t k = 1;  // time index in [1, N]
    std::string id;
};

struct JointChanceConstraint {
    std::vector<ConstraintRow> rows;
    double alpha = 0.05;

    void validate(std::size_t horizon, std::size_t n) const {
        if (!(alpha > 0.0) || !(alpha < kMaxAlpha))
            throw DomainError("alpha must lie in (0, 1/6): the VP bound needs lambda > sqrt(5/3)");
        if (rows.empty()) throw DomainError("chance constraint has no rows");
        for (const auto& r : rows) {
            if (r.k < 1 || r.k > horizon) throw DimensionError("row '" + r.id + "' has time outside [1, N]");
            if (static_cast<std::size_t>(r.G.size()) != n)
                throw DimensionError("row '" + r.id + "' has wrong length");
        }
    }
};

/// Per-row lambda, aligned with the rows of a JointChanceConstraint.
/// An infinite lambda marks a row that carries no risk (zero spread).
struct RiskAllocation {
    std::vector<std::string> ids;
    std::vector<double> lambdas;

    std::size_t size() const { return lambdas.size(); }

    double risk(std::size_t i) const {
        const double l = lambdas.at(i);
        return std::isinf(l) ? 0.0 : vp_bound(l);
    }

    double risk_sum() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += risk(i);
        return s;
    }

    bool lambdas_valid() const {
        for (double l : lambdas)
            if (!(l > kVpLambdaMin)) return false;
        return true;
    }
};

struct Attestation {
    bool independence = false;
    bool unimodal = false;
};

/// One row of E + lambda Std <= h, with the moments as functions of U.
struct ReformulatedConstraint {
    std::string id;
    std::size_t k = 1;
    double h = 0.0;
    ConstraintMoments moments;

    double mean(const Vector& U) const { return moments.mean(U); }
    double stddev(const Vector& U) const { return moments.stddev(U); }
    double slack(const Vector& U, double lambda) const {
        const double sd = stddev(U);
        if (moments.deterministic() || (std::isinf(lambda) && sd == 0.0)) return h - mean(U);
        return h - mean(U) - lambda * sd;
    }
};

inline std::vector<ReformulatedConstraint> build_reformulation(const SystemSpec& spec,
                                                               const JointChanceConstraint& jcc,
                                                               const Attestation& att) {
    if (!att.independence) throw AssumptionNotAttested("independence of random entries is not attested");
    if (!att.unimodal) throw AssumptionNotAttested("unimodality of constraint margins is not attested");
    spec.validate();
    jcc.validate(spec.horizon(), spec.n());
    std::vector<ReformulatedConstraint> out;
    out.reserve(jcc.rows.size());
    for (const auto& r : jcc.rows) out.push_back({r.id, r.k, r.h, constraint_moments(spec, r.G, r.k)});
    return out;
}

struct RowCheck {
    std::string id;
    double mean = 0.0;
    double stddev = 0.0;
    double lambda = 0.0;
    double slack = 0.0;
    double risk = 0.0;
    bool ok = false;
};

struct FeasibilityReport {
    std::vector<RowCheck> rows;
    double risk_sum = 0.0;
    double alpha = 0.0;
    bool allocation_valid = false;
    bool slacks_ok = false;
    bool feasible = false;
};

/// Evaluates E + lambda Std <= h row by row and the risk budget for (U, lambda).
inline FeasibilityReport check_feasibility(const std::vector<ReformulatedConstraint>& rows, const Vector& U,
                                           const RiskAllocation& alloc, double alpha, double tol) {
    if (alloc.size() != rows.size()) throw DimensionError("allocation does not match rows");
    FeasibilityReport rep;
    rep.alpha = alpha;
    rep.allocation_valid = alloc.lambdas_valid();
    rep.slacks_ok = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        RowCheck rc;
        rc.id = rows[i].id;
        rc.mean = rows[i].mean(U);
        rc.stddev = rows[i].stddev(U);
        rc.lambda = alloc.lambdas[i];
        rc.slack = rows[i].slack(U, rc.lambda);
        rc.risk = rc.lambda > kVpLambdaMin ? alloc.risk(i) : kMaxAlpha;
        const double scale = std::max({1.0, std::abs(rows[i].h), std::abs(rc.mean)});
        // an infinite lambda only certifies a row with no spread
        const bool spread_ok = !std::isinf(rc.lambda) || rc.stddev <= 1e-12 * scale;
        rc.ok = spread_ok && rc.slack >= -tol * scale;
        rep.slacks_ok = rep.slacks_ok && rc.ok;
        rep.risk_sum += rc.risk;
        rep.rows.push_back(rc);
    }
    rep.feasible = rep.allocation_valid && rep.slacks_ok && rep.risk_sum <= alpha * (1.0 + 1e-12);
    return rep;
}

}  // namespace vpcc
