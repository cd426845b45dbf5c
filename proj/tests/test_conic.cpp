#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vpcc/vpcc.hpp"

using namespace vpcc;

namespace {

ConicProgram quadratic(Eigen::Index d) {
    ConicProgram p;
    p.P = Matrix::Identity(d, d);
    p.c = -Vector::Ones(d);
    p.A_u.resize(0, d);
    p.b_u.resize(0);
    return p;
}

void add_box(ConicProgram& p, double lo, double hi) {
    const auto d = p.c.size();
    p.A_u = Matrix(2 * d, d);
    p.A_u << Matrix::Identity(d, d), -Matrix::Identity(d, d);
    p.b_u = Vector(2 * d);
    p.b_u << Vector::Constant(d, hi), Vector::Constant(d, -lo);
}

// ||U|| <= radius as a SOC row
SocConstraint ball(Eigen::Index d, double radius) {
    return {Vector::Zero(d), 0.0, 1.0, Matrix::Identity(d, d), Vector::Zero(d), 0.0, radius};
}

}  // namespace

TEST(ConicSolve, UnconstrainedQuadratic) {
    const auto out = solve(quadratic(4));
    ASSERT_EQ(out.status, SolverStatus::Optimal);
    EXPECT_LE((out.U - Vector::Ones(4)).norm(), 1e-6);
    EXPECT_NEAR(out.objective, -2.0, 1e-6);
}

TEST(ConicSolve, ConstantSocViolationIsInfeasible) {
    ConicProgram p;
    p.P = Matrix::Zero(1, 1);
    p.c = Vector::Ones(1);
    p.A_u.resize(0, 1);
    p.soc.push_back({Vector::Zero(1), 0.0, 2.0, Matrix(1, 0), Vector(0), 1.0, 1.0});
    const auto out = solve(p);
    EXPECT_EQ(out.status, SolverStatus::Infeasible);
    EXPECT_NE(out.diagnostic.find("soc[0]"), std::string::npos);
}

TEST(ConicSolve, BoxQuadraticClips) {
    ConicProgram p = quadratic(3);
    p.c = Vector(3);
    p.c << -2.0, 0.5, -0.25;  // unconstrained optimum (2, -0.5, 0.25)
    add_box(p, -0.4, 1.0);
    const auto out = solve(p);
    ASSERT_EQ(out.status, SolverStatus::Optimal);
    EXPECT_NEAR(out.U(0), 1.0, 1e-5);
    EXPECT_NEAR(out.U(1), -0.4, 1e-5);
    EXPECT_NEAR(out.U(2), 0.25, 1e-5);
}

TEST(ConicSolve, LinearObjectiveOverBall) {
    ConicProgram p;
    p.P = Matrix::Zero(2, 2);
    p.c = -Vector::Ones(2);
    p.A_u.resize(0, 2);
    p.soc.push_back(ball(2, 1.0));
    const auto out = solve(p);
    ASSERT_EQ(out.status, SolverStatus::Optimal);
    EXPECT_NEAR(out.objective, -std::sqrt(2.0), 1e-5);
    EXPECT_LE(out.U.norm(), 1.0 + 1e-9);
}

TEST(ConicSolve, InfeasibleLinearSystem) {
    ConicProgram p = quadratic(1);
    p.A_u = Matrix(2, 1);
    p.A_u << 1.0, -1.0;
    p.b_u = Vector(2);
    p.b_u << 0.0, -1.0;  // u <= 0 and u >= 1
    EXPECT_EQ(solve(p).status, SolverStatus::Infeasible);
}

TEST(ConicSolve, EmptyInteriorStillSolves) {
    ConicProgram p = quadratic(2);
    p.A_u = Matrix(2, 2);
    p.A_u << 1.0, 0.0, -1.0, 0.0;
    p.b_u = Vector(2);
    p.b_u << 0.3, -0.3;  // u0 == 0.3
    const auto out = solve(p);
    ASSERT_EQ(out.status, SolverStatus::Optimal);
    EXPECT_NEAR(out.U(0), 0.3, 1e-5);
    EXPECT_NEAR(out.U(1), 1.0, 1e-5);
}

TEST(ConicSolve, RandomProgramsSatisfyConstraintsAndBeatProbes) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index d = 4;
        ConicProgram p;
        Matrix M(d, d);
        for (Eigen::Index i = 0; i < d * d; ++i) M(i) = g(rng);
        p.P = M * M.transpose() + 0.1 * Matrix::Identity(d, d);
        p.c = Vector(d);
        for (Eigen::Index i = 0; i < d; ++i) p.c(i) = 5.0 * g(rng);
        add_box(p, -3.0, 3.0);
        for (int r = 0; r < 3; ++r) {
            SocConstraint q;
            q.a = Vector(d);
            for (Eigen::Index i = 0; i < d; ++i) q.a(i) = g(rng);
            q.b = 0.0;
            q.lambda = 1.5 + std::abs(g(rng));
            q.L = Matrix(d, 2);
            for (Eigen::Index i = 0; i < 2 * d; ++i) q.L(i) = 0.3 * g(rng);
            q.v = Vector::Zero(2);
            q.s = 0.1;
            q.h = 2.0;  // U = 0 is strictly feasible
            p.soc.push_back(q);
        }
        const auto out = solve(p);
        ASSERT_EQ(out.status, SolverStatus::Optimal) << trial;
        EXPECT_LE(p.max_violation(out.U), 10.0 * 1e-6);
        EXPECT_LE(out.kkt.primal, 1e-6);
        EXPECT_LE(out.kkt.gap, 1e-6);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int probe = 0; probe < 200; ++probe) {
            Vector x(d);
            for (Eigen::Index i = 0; i < d; ++i) x(i) = u(rng);
            if (p.max_violation(x) <= 0.0) EXPECT_LE(out.objective, p.objective(x) + 1e-6);
        }
    }
}

TEST(ConicSolve, Deterministic) {
    ConicProgram p = quadratic(3);
    add_box(p, -0.5, 0.5);
    p.soc.push_back(ball(3, 0.7));
    const auto a = solve(p);
    const auto b = solve(p);
    EXPECT_EQ(a.status, b.status);
    EXPECT_EQ(a.iterations, b.iterations);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(a.U(i), b.U(i));
    EXPECT_EQ(a.objective, b.objective);
}

TEST(ConicProgramCheck, RejectsMalformedPrograms) {
    ConicProgram p = quadratic(2);
    p.P(0, 1) = 1.0;
    EXPECT_THROW(solve(p), DomainError);
    ConicProgram q = quadratic(2);
    q.P(0, 0) = -1.0;
    EXPECT_THROW(solve(q), DomainError);
    ConicProgram r = quadratic(2);
    r.soc.push_back(ball(3, 1.0));
    EXPECT_THROW(solve(r), DimensionError);
}

TEST(ConicProgramJson, FieldNames) {
    ConicProgram p = quadratic(2);
    p.soc.push_back(ball(2, 1.0));
    const auto j = conic_program_json(p);
    for (const char* key : {"P", "c", "A_u", "b_u", "soc"}) EXPECT_TRUE(j.contains(key)) << key;
    for (const char* key : {"a", "b", "lambda", "L", "v", "s", "h"}) EXPECT_TRUE(j["soc"][0].contains(key)) << key;
}

namespace {

class CountingBackend final : public ConicBackend {
public:
    mutable int calls = 0;
    SolverOutcome solve(const ConicProgram& program, const SolverOptions& opts) const override {
        ++calls;
        return BarrierSolver{}.solve(program, opts);
    }
};

}  // namespace

TEST(ConicBackendSeam, UStepUsesSuppliedBackend) {
    Matrix A(1, 1);
    A << 0.5;
    const auto spec = make_time_invariant(RandomMatrixModel::deterministic(A), 2, Matrix::Ones(1, 1), Vector::Ones(1),
                                          {Matrix::Identity(1, 1), Vector::Ones(1)});
    JointChanceConstraint jcc;
    jcc.alpha = 0.1;
    jcc.rows.push_back({RowVector::Ones(1), 2.0, 2, "r"});
    const auto rows = build_reformulation(spec, jcc, {true, true});
    CountingBackend backend;
    const auto out = u_step(spec, rows, init_lambdas(jcc), QuadraticCost::time_invariant(Matrix::Ones(1, 1),
                                                                                          -Vector::Ones(1), 2),
                            {}, backend);
    EXPECT_EQ(backend.calls, 1);
    EXPECT_EQ(out.status, SolverStatus::Optimal);
}
