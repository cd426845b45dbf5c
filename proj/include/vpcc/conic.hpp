#pragma once

// Convex subproblem of the alternating search:
//
//     minimize    1/2 U^T P U + c^T U + constant
//     subject to  A_u U <= b_u
//                 a^T U + b + lambda * || (L^T U + v ; sqrt(s)) || <= h   (each SOC row)
//
// The bundled backend is a primal log-barrier interior-point method with a
// phase-1 feasibility search. Other backends plug in through ConicBackend.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vpcc/errors.hpp"
#include "vpcc/random_matrix.hpp"

namespace vpcc {

struct SocConstraint {
    Vector a;
    double b = 0.0;
    double lambda = 0.0;
    Matrix L;  // dim x r, may have zero columns
    Vector v;  // r
    double s = 0.0;
    double h = 0.0;

    /// lhs - h; positive means violated.
    double violation(const Vector& U) const {
        double sq = s;
        if (L.cols() > 0) sq += (L.transpose() * U + v).squaredNorm();
        return a.dot(U) + b + lambda * std::sqrt(std::max(sq, 0.0)) - h;
    }
};

struct ConicProgram {
    Matrix P;
    Vector c;
    double constant = 0.0;
    Matrix A_u;
    Vector b_u;
    std::vector<SocConstraint> soc;

    std::size_t dim() const { return static_cast<std::size_t>(c.size()); }

    double objective(const Vector& U) const { return 0.5 * U.dot(P * U) + c.dot(U) + constant; }

    void validate() const {
        const auto d = c.size();
        if (P.rows() != d || P.cols() != d) throw DimensionError("P must be dim x dim");
        if (A_u.rows() != b_u.size() || (A_u.rows() > 0 && A_u.cols() != d))
            throw DimensionError("linear constraints have inconsistent dimensions");
        if (!P.isApprox(P.transpose(), 1e-12) && !(P - P.transpose()).isZero(1e-12))
            throw DomainError("P must be symmetric");
        if (d > 0) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (P + P.transpose()));
            const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
            if (eig.eigenvalues().minCoeff() < -1e-9 * scale) throw DomainError("P must be PSD");
        }
        for (const auto& q : soc) {
            if (q.a.size() != d) throw DimensionError("SOC a has wrong length");
            if (q.L.cols() > 0 && q.L.rows() != d) throw DimensionError("SOC L has wrong row count");
            if (q.v.size() != q.L.cols()) throw DimensionError("SOC v must match L columns");
            if (!(q.lambda >= 0.0) || !std::isfinite(q.lambda)) throw DomainError("SOC lambda must be finite and >= 0");
            if (!(q.s >= 0.0)) throw DomainError("SOC s must be >= 0");
        }
    }

    /// Largest constraint violation at U (0 if feasible).
    double max_violation(const Vector& U, std::string* which = nullptr) const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < A_u.rows(); ++i) {
            const double g = A_u.row(i).dot(U) - b_u(i);
            if (g > worst) {
                worst = g;
                if (which) *which = "linear[" + std::to_string(i) + "]";
            }
        }
        for (std::size_t j = 0; j < soc.size(); ++j) {
            const double g = soc[j].violation(U);
            if (g > worst) {
                worst = g;
                if (which) *which = "soc[" + std::to_string(j) + "]";
            }
        }
        return worst;
    }
};

enum class SolverStatus { Optimal, Infeasible, IterationLimit, NumericalFailure };

inline const char* to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::Optimal: return "Optimal";
        case SolverStatus::Infeasible: return "Infeasible";
        case SolverStatus::IterationLimit: return "IterationLimit";
        case SolverStatus::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

struct KktResiduals {
    double primal = 0.0;  // max violation / max(1, |rhs|)
    double dual = 0.0;    // stationarity residual / max(1, |grad f|)
    double gap = 0.0;     // duality gap bound / max(1, |f|)
};

struct SolverOutcome {
    SolverStatus status = SolverStatus::NumericalFailure;
    Vector U;
    double objective = std::numeric_limits<double>::quiet_NaN();
    KktResiduals kkt;
    double wall_time_ms = 0.0;
    int iterations = 0;
    std::string diagnostic;
};

struct SolverOptions {
    double tol = 1e-6;
    int max_iter = 500;
};

/// Adapter seam for alternative solver implementations.
class ConicBackend {
public:
    virtual ~ConicBackend() = default;
    virtual SolverOutcome solve(const ConicProgram& program, const SolverOptions& opts) const = 0;
};

namespace detail {

// Constraint data in barrier form. Linear: b - A x > 0.
// Cone: tau = e - a^T x > || F x + g ||_2 extended by a constant c0 >= 0:
// tau^2 - ||F x + g||^2 - c0 > 0, tau > 0.
struct BarrierCone {
    Vector a;
    double e = 0.0;
    Matrix F;
    Vector g;
    double c0 = 0.0;
};

struct BarrierProblem {
    Matrix P;  // may be empty (linear objective)
    Vector c;
    Matrix A;
    Vector b;
    std::vector<BarrierCone> cones;

    Eigen::Index dim() const { return c.size(); }
    double degree() const { return static_cast<double>(A.rows()) + 2.0 * static_cast<double>(cones.size()); }

    double f(const Vector& x) const { return (P.size() ? 0.5 * x.dot(P * x) : 0.0) + c.dot(x); }
    Vector grad_f(const Vector& x) const { return P.size() ? Vector(P * x + c) : c; }

    bool interior(const Vector& x) const {
        if (A.rows() > 0 && ((b - A * x).array() <= 0.0).any()) return false;
        for (const auto& k : cones) {
            const double tau = k.e - k.a.dot(x);
            if (!(tau > 0.0)) return false;
            double w2 = k.c0;
            if (k.F.rows() > 0) w2 += (k.F * x + k.g).squaredNorm();
            if (!(tau * tau - w2 > 0.0)) return false;
        }
        return true;
    }

    double barrier(const Vector& x) const {
        double phi = 0.0;
        if (A.rows() > 0) phi -= (b - A * x).array().log().sum();
        for (const auto& k : cones) {
            const double tau = k.e - k.a.dot(x);
            double w2 = k.c0;
            if (k.F.rows() > 0) w2 += (k.F * x + k.g).squaredNorm();
            phi -= std::log(tau * tau - w2);
        }
        return phi;
    }

    void barrier_derivatives(const Vector& x, Vector& grad, Matrix& hess) const {
        const auto d = dim();
        grad = Vector::Zero(d);
        hess = Matrix::Zero(d, d);
        if (A.rows() > 0) {
            const Vector inv = (b - A * x).cwiseInverse();
            grad += A.transpose() * inv;
            hess += A.transpose() * inv.cwiseAbs2().asDiagonal() * A;
        }
        for (const auto& k : cones) {
            const double tau = k.e - k.a.dot(x);
            Vector dD = -2.0 * tau * k.a;
            Matrix d2D = 2.0 * k.a * k.a.transpose();
            double w2 = k.c0;
            if (k.F.rows() > 0) {
                const Vector w = k.F * x + k.g;
                w2 += w.squaredNorm();
                dD -= 2.0 * k.F.transpose() * w;
                d2D -= 2.0 * k.F.transpose() * k.F;
            }
            const double D = tau * tau - w2;
            grad -= dD / D;
            hess += dD * dD.transpose() / (D * D) - d2D / D;
        }
    }
};

enum class PathStatus { Converged, EarlyStop, IterationLimit, NumericalFailure };

struct PathResult {
    PathStatus status = PathStatus::NumericalFailure;
    Vector x;
    double t = 1.0;
    double stationarity = 0.0;  // || grad f + grad phi / t ||
    int iterations = 0;
};

// Follows the central path from a strictly feasible x0 until the gap bound
// degree / t drops below tol * max(1, |f|), or `stop(x)` fires.
inline PathResult follow_central_path(const BarrierProblem& bp, Vector x, double tol, int max_iter,
                                      const std::function<bool(const Vector&, double)>& stop = {}) {
    constexpr double kMu = 10.0;
    constexpr double kNewtonTol = 1e-10;
    const double nu = bp.degree();
    const auto d = bp.dim();

    PathResult res;
    Vector gphi;
    Matrix hphi;
    bp.barrier_derivatives(x, gphi, hphi);
    const Vector gf0 = bp.grad_f(x);
    double t = 1.0;
    if (gf0.squaredNorm() > 0.0) {
        const double t_fit = -gf0.dot(gphi) / gf0.squaredNorm();
        if (std::isfinite(t_fit) && t_fit > 0.0) t = t_fit;
    }
    if (nu > 0.0) t = std::max(t, nu / std::max(1.0, std::abs(bp.f(x))) * 1e-3);

    int iters = 0;
    while (true) {
        // centering
        for (int inner = 0; inner < 200; ++inner) {
            if (iters >= max_iter) {
                res.status = PathStatus::IterationLimit;
                res.x = x;
                res.t = t;
                res.iterations = iters;
                return res;
            }
            bp.barrier_derivatives(x, gphi, hphi);
            const Vector grad = t * bp.grad_f(x) + gphi;
            Matrix H = hphi;
            if (bp.P.size()) H += t * bp.P;
            const double ridge = 1e-13 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
            H.diagonal().array() += ridge;
            Eigen::LDLT<Matrix> ldlt(H);
            Vector dx = -ldlt.solve(grad);
            if (ldlt.info() != Eigen::Success || !dx.allFinite()) {
                res.status = PathStatus::NumericalFailure;
                res.x = x;
                res.t = t;
                res.iterations = iters;
                return res;
            }
            ++iters;
            const double dec2 = -grad.dot(dx);
            res.stationarity = grad.norm() / t;
            // backtracking line search on t f + phi
            const double f0 = t * bp.f(x) + bp.barrier(x);
            // below roundoff in f0 the line search cannot see progress
            if (dec2 / 2.0 <= std::max(kNewtonTol, 1e-14 * std::abs(f0))) break;
            double step = 1.0;
            bool moved = false;
            for (int ls = 0; ls < 80; ++ls) {
                const Vector xn = x + step * dx;
                if (bp.interior(xn)) {
                    const double fn = t * bp.f(xn) + bp.barrier(xn);
                    if (std::isfinite(fn) && fn <= f0 - 0.01 * step * dec2) {
                        x = xn;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (stop && stop(x, t)) {
                res.status = PathStatus::EarlyStop;
                res.x = x;
                res.t = t;
                res.iterations = iters;
                return res;
            }
            if (!moved) break;  // no further progress at this t
        }
        if (nu == 0.0 || nu / t <= tol * std::max(1.0, std::abs(bp.f(x)))) {
            res.status = PathStatus::Converged;
            res.x = x;
            res.t = t;
            res.iterations = iters;
            return res;
        }
        t *= kMu;
    }
}

inline BarrierCone to_barrier_cone(const SocConstraint& q) {
    BarrierCone k;
    k.a = q.a;
    k.e = q.h - q.b;
    if (q.L.cols() > 0 && q.lambda != 0.0) {
        k.F = q.lambda * q.L.transpose();
        k.g = q.lambda * q.v;
    } else {
        k.F.resize(0, q.a.size());
        k.g.resize(0);
    }
    k.c0 = q.lambda * q.lambda * q.s;
    return k;
}

}  // namespace detail

/// Log-barrier interior-point backend.
class BarrierSolver final : public ConicBackend {
public:
    SolverOutcome solve(const ConicProgram& program, const SolverOptions& opts) const override {
        const auto start = std::chrono::steady_clock::now();
        SolverOutcome out = solve_impl(program, opts);
        out.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return out;
    }

private:
    static double rhs_scale(const ConicProgram& pr) {
        double s = 1.0;
        if (pr.b_u.size() > 0) s = std::max(s, pr.b_u.cwiseAbs().maxCoeff());
        for (const auto& q : pr.soc) s = std::max({s, std::abs(q.h), std::abs(q.b)});
        return s;
    }

    static SolverOutcome solve_impl(const ConicProgram& pr, const SolverOptions& opts) {
        pr.validate();
        const auto d = static_cast<Eigen::Index>(pr.dim());
        const double scale = rhs_scale(pr);
        SolverOutcome out;

        // Phase 1: minimise sigma over (x, sigma) with every constraint relaxed
        // by sigma, stopping once sigma < 0.
        Vector x = Vector::Zero(d);
        std::string worst_name;
        double worst = pr.max_violation(x, &worst_name);
        const bool strictly_feasible = interior_of(pr, x);
        int phase1_iters = 0;
        double relax = 0.0;
        if (!strictly_feasible) {
            detail::BarrierProblem p1;
            p1.c = Vector::Zero(d + 1);
            p1.c(d) = 1.0;
            const auto nl = pr.A_u.rows();
            p1.A = Matrix::Zero(nl + 1, d + 1);
            p1.b = Vector::Zero(nl + 1);
            if (nl > 0) {
                p1.A.topLeftCorner(nl, d) = pr.A_u;
                p1.A.block(0, d, nl, 1).setConstant(-1.0);
                p1.b.head(nl) = pr.b_u;
            }
            // sigma >= -1 keeps phase 1 bounded
            p1.A(nl, d) = -1.0;
            p1.b(nl) = 1.0;
            for (const auto& q : pr.soc) {
                auto k = detail::to_barrier_cone(q);
                Vector a(d + 1);
                a << k.a, -1.0;
                k.a = a;
                if (k.F.rows() > 0) {
                    Matrix F = Matrix::Zero(k.F.rows(), d + 1);
                    F.leftCols(d) = k.F;
                    k.F = F;
                } else {
                    k.F.resize(0, d + 1);
                }
                p1.cones.push_back(std::move(k));
            }
            Vector z(d + 1);
            z << x, std::max(worst, 0.0) + 1.0 + 0.1 * std::abs(worst);
            // the start must be interior even when a cone's tau is tight
            while (!p1.interior(z) && std::isfinite(z(d))) z(d) = 2.0 * z(d) + 1.0;
            if (!std::isfinite(z(d))) {
                out.status = SolverStatus::NumericalFailure;
                out.diagnostic = "could not construct a phase-1 starting point";
                return out;
            }
            const double feas_tol = opts.tol * scale;
            // stop once strictly feasible; declare a stall after 50 iterations
            // without progress, not counting the first centering
            double best = z(d);
            double t_first = -1.0;
            int stalled = 0;
            auto stop = [&](const Vector& zz, double t) {
                if (zz(d) < 0.0 || interior_of(pr, zz.head(d))) return true;
                if (t_first < 0.0) t_first = t;
                if (zz(d) < best - 1e-12 * std::max(1.0, std::abs(best))) {
                    best = zz(d);
                    stalled = 0;
                } else if (t > t_first && zz(d) > feas_tol && ++stalled >= 50) {
                    return true;
                }
                return false;
            };
            const auto r1 = detail::follow_central_path(p1, z, 1e-3 * opts.tol, opts.max_iter, stop);
            phase1_iters = r1.iterations;
            x = r1.x.head(d);
            const double sigma = interior_of(pr, x) ? -1.0 : r1.x(d);
            if (r1.status == detail::PathStatus::NumericalFailure && !(sigma < 0.0)) {
                out.status = SolverStatus::NumericalFailure;
                out.U = x;
                out.iterations = phase1_iters;
                out.diagnostic = "phase-1 Newton system could not be solved";
                return out;
            }
            if (!(sigma < 0.0)) {
                if (sigma > feas_tol) {
                    out.status = SolverStatus::Infeasible;
                    out.U = x;
                    out.iterations = phase1_iters;
                    worst = pr.max_violation(x, &worst_name);
                    std::ostringstream msg;
                    msg << "least-infeasible point found has max violation " << worst << " at "
                        << worst_name;
                    out.diagnostic = msg.str();
                    out.kkt.primal = worst / scale;
                    return out;
                }
                // feasible set has (numerically) empty interior: solve the
                // problem relaxed by a fraction of the tolerance
                relax = std::max(sigma, 0.0) + 0.5 * feas_tol;
            }
        }

        detail::BarrierProblem p2;
        p2.P = pr.P;
        p2.c = pr.c;
        p2.A = pr.A_u;
        p2.b = pr.b_u.array() + relax;
        if (p2.A.rows() == 0) p2.A.resize(0, d);
        for (const auto& q : pr.soc) {
            auto k = detail::to_barrier_cone(q);
            k.e += relax;
            p2.cones.push_back(std::move(k));
        }
        if (!p2.interior(x)) {
            out.status = SolverStatus::NumericalFailure;
            out.U = x;
            out.diagnostic = "phase-1 point is not interior";
            return out;
        }
        const auto r2 = detail::follow_central_path(p2, x, opts.tol, opts.max_iter);
        out.U = r2.x;
        out.iterations = phase1_iters + r2.iterations;
        out.objective = pr.objective(r2.x);
        const double fval = std::abs(p2.f(r2.x));
        out.kkt.primal = pr.max_violation(r2.x) / scale;
        out.kkt.dual = r2.stationarity / std::max(1.0, p2.grad_f(r2.x).norm());
        out.kkt.gap = p2.degree() / r2.t / std::max(1.0, fval);
        switch (r2.status) {
            case detail::PathStatus::Converged:
            case detail::PathStatus::EarlyStop:
                out.status = std::max({out.kkt.primal, out.kkt.gap}) <= opts.tol
                                 ? SolverStatus::Optimal
                                 : SolverStatus::NumericalFailure;
                break;
            case detail::PathStatus::IterationLimit: out.status = SolverStatus::IterationLimit; break;
            case detail::PathStatus::NumericalFailure: out.status = SolverStatus::NumericalFailure; break;
        }
        if (out.status == SolverStatus::NumericalFailure && out.diagnostic.empty()) {
            Vector g;
            Matrix H;
            p2.barrier_derivatives(r2.x, g, H);
            if (p2.P.size()) H += r2.t * p2.P;
            Eigen::JacobiSVD<Matrix> svd(H);
            const auto& sv = svd.singularValues();
            std::ostringstream msg;
            msg << "Newton system ill-conditioned: condition estimate "
                << (sv.size() ? sv(0) / std::max(sv(sv.size() - 1), 1e-300) : 0.0);
            out.diagnostic = msg.str();
        }
        return out;
    }

    static bool interior_of(const ConicProgram& pr, const Vector& x) {
        detail::BarrierProblem bp;
        bp.c = Vector::Zero(x.size());
        bp.A = pr.A_u;
        bp.b = pr.b_u;
        if (bp.A.rows() == 0) bp.A.resize(0, x.size());
        for (const auto& q : pr.soc) bp.cones.push_back(detail::to_barrier_cone(q));
        return bp.interior(x);
    }
};

inline SolverOutcome solve(const ConicProgram& program, const SolverOptions& opts = {}) {
    return BarrierSolver{}.solve(program, opts);
}

}  // namespace vpcc
