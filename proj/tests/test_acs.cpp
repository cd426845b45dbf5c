#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vpcc/vpcc.hpp"

using namespace vpcc;

namespace {

JointChanceConstraint rows_of(std::size_t count, double alpha) {
    JointChanceConstraint j;
    j.alpha = alpha;
    for (std::size_t i = 0; i < count; ++i) j.rows.push_back({RowVector::Ones(1), 1.0, 1, "r" + std::to_string(i)});
    return j;
}

struct TwoBus {
    ProblemConfig cfg;
    explicit TwoBus(const char* file = "two_bus.json") : cfg(load_config(std::string(VPCC_CONFIG_DIR "/") + file)) {}
    SolveReport solve(double one_minus_alpha, AcsConfig acs) const {
        return run(cfg.system(), cfg.constraint(1.0 - one_minus_alpha), cfg.cost(), cfg.attestation, acs);
    }
    SolveReport solve(double one_minus_alpha) const { return solve(one_minus_alpha, cfg.acs); }
};

// Scalar coin system, one row G x(2) <= h.
struct Scalar {
    SystemSpec spec = oracle::scalar_coin_system(2);
    JointChanceConstraint jcc;
    explicit Scalar(double h, double alpha = 0.1) {
        jcc.alpha = alpha;
        jcc.rows.push_back({RowVector::Ones(1), h, 2, "x2"});
    }
    std::vector<ReformulatedConstraint> rows() const { return build_reformulation(spec, jcc, {true, true}); }
};

}  // namespace

TEST(InitLambdas, UniformRisk) {
    auto a = init_lambdas(rows_of(2, 0.16));
    EXPECT_NEAR(a.lambdas[0], std::sqrt(4.0 / (9.0 * 0.08) - 1.0), 1e-12);
    EXPECT_NEAR(a.lambdas[1], 2.1344, 1e-4);
    EXPECT_NEAR(a.risk_sum(), 0.16, 1e-12);

    a = init_lambdas(rows_of(5, 0.05));
    EXPECT_NEAR(a.lambdas[4], 6.5912, 1e-4);
    EXPECT_NEAR(a.risk_sum(), 0.05, 1e-12);

    a = init_lambdas(rows_of(1, 1.0 / 6.0 - 1e-13));
    EXPECT_GT(a.lambdas[0], kVpLambdaMin);
    EXPECT_NEAR(a.lambdas[0], kVpLambdaMin, 1e-5);
    EXPECT_THROW(init_lambdas(rows_of(1, 1.0 / 6.0)), DomainError);
}

TEST(LambdaStep, ZeroSpreadRowsCarryNoRisk) {
    Matrix A(1, 1);
    A << 0.5;
    const auto spec = make_time_invariant(RandomMatrixModel::deterministic(A), 2, Matrix::Ones(1, 1), Vector::Ones(1));
    JointChanceConstraint jcc = rows_of(2, 0.1);
    jcc.rows[1].k = 2;
    const auto rows = build_reformulation(spec, jcc, {true, true});
    const Vector U = Vector::Zero(2);
    for (auto policy : {LambdaStepPolicy::Tight, LambdaStepPolicy::UniformRelax}) {
        const auto a = lambda_step(rows, U, policy, 0.1);
        EXPECT_TRUE(std::isinf(a.lambdas[0]));
        EXPECT_TRUE(std::isinf(a.lambdas[1]));
        EXPECT_EQ(a.risk_sum(), 0.0);
    }
    const Vector bad = Vector::Constant(2, 5.0);  // x(1) = 5.5 > 1
    EXPECT_THROW(lambda_step(rows, bad, LambdaStepPolicy::Tight, 0.1), AllocationInfeasible);
}

TEST(LambdaStep, TightRow) {
    Scalar s(10.0);
    Vector U(2);
    U << 1.0, 0.0;  // mean 2, variance 6
    const auto a = lambda_step(s.rows(), U, LambdaStepPolicy::Tight, 0.1);
    EXPECT_NEAR(a.lambdas[0], 8.0 / std::sqrt(6.0), 1e-12);
    EXPECT_NEAR(a.lambdas[0], 3.2660, 1e-4);
    EXPECT_NEAR(a.risk(0), 4.0 / 105.0, 1e-12);  // 0.0381
}

TEST(LambdaStep, UniformRelaxSpendsTheBudget) {
    Scalar s(10.0);
    Vector U(2);
    U << 1.0, 0.0;
    const auto rows = s.rows();
    const auto a = lambda_step(rows, U, LambdaStepPolicy::UniformRelax, 0.1);
    EXPECT_NEAR(a.risk_sum(), 0.1, 1e-12);
    EXPECT_LE(a.lambdas[0], 8.0 / std::sqrt(6.0));
    EXPECT_GE(rows[0].slack(U, a.lambdas[0]), 0.0);
}

TEST(LambdaStep, UncertifiableInputIsRejected) {
    Scalar s(3.0);
    Vector U(2);
    U << 1.0, 0.0;  // (3 - 2) / sqrt(6) < sqrt(5/3): risk 1/6 > alpha
    EXPECT_THROW(lambda_step(s.rows(), U, LambdaStepPolicy::Tight, 0.1), AllocationInfeasible);
}

TEST(AcsRun, DeterministicSpecConvergesInOneIteration) {
    Matrix A(2, 2);
    A << 1.0, 0.1, 0.0, 0.9;
    InputPolytope poly{Matrix(2, 1), Vector::Ones(2)};
    poly.A << 1.0, -1.0;
    const auto spec = make_time_invariant(RandomMatrixModel::deterministic(A), 3, (Matrix(2, 1) << 0.0, 1.0).finished(),
                                          (Vector(2) << 1.0, 0.0).finished(), poly);
    JointChanceConstraint jcc;
    jcc.alpha = 0.05;
    for (std::size_t k = 1; k <= 3; ++k) jcc.rows.push_back({(RowVector(2) << 0.0, -1.0).finished(), -0.1, k, "v"});
    const auto cost = QuadraticCost::time_invariant(Matrix::Ones(1, 1), Vector::Zero(1), 3);
    const auto rep = run(spec, jcc, cost, {true, true});
    ASSERT_EQ(rep.status, SolveStatus::Optimal);
    EXPECT_EQ(rep.trace.size(), 1u);
    ASSERT_TRUE(rep.feasibility);
    EXPECT_TRUE(rep.feasibility->feasible);
    EXPECT_EQ(rep.allocation.risk_sum(), 0.0);

    // nominal QP: min sum u^2 s.t. x2(k) >= 0.1 with x2(k+1) = 0.9 x2(k) + u(k)
    ConicProgram qp;
    cost.fill_objective(qp);
    fill_input_polytope(spec, qp);
    const auto na = qp.A_u.rows();
    qp.A_u.conservativeResize(na + 3, Eigen::NoChange);
    qp.b_u.conservativeResize(na + 3);
    for (int k = 1; k <= 3; ++k) {
        RowVector r = RowVector::Zero(3);
        for (int t = 0; t < k; ++t) r(t) = -std::pow(0.9, k - 1 - t);
        qp.A_u.row(na + k - 1) = r;
        qp.b_u(na + k - 1) = -0.1;
    }
    const auto ref = solve(qp);
    ASSERT_EQ(ref.status, SolverStatus::Optimal);
    EXPECT_LE((rep.U - ref.U).norm(), 1e-5);
}

TEST(AcsRun, TwoBusFeasibleAtEightyFourPercent) {
    const TwoBus tb;
    const auto rep = tb.solve(0.84);
    ASSERT_EQ(rep.status, SolveStatus::Optimal) << rep.message;
    ASSERT_TRUE(rep.has_solution());
    for (Eigen::Index i = 0; i < rep.U.size(); ++i) {
        EXPECT_GE(rep.U(i), 60.0 - 1e-6);
        EXPECT_LE(rep.U(i), 600.0 + 1e-6);
    }
    EXPECT_TRUE(rep.feasibility->feasible);
    EXPECT_LE(rep.feasibility->risk_sum, 0.16 * (1.0 + 1e-12));
    for (std::size_t i = 1; i < rep.trace.size(); ++i)
        EXPECT_LE(rep.trace[i].objective, rep.trace[i - 1].objective + 10.0 * 1e-6 * std::abs(rep.trace[i - 1].objective));
    for (const auto& it : rep.trace) {
        EXPECT_LE(it.risk_sum, 0.16 * (1.0 + 1e-12));
        for (double l : it.lambdas) EXPECT_GT(l, kVpLambdaMin);
    }
}

TEST(AcsRun, TwoBusInfeasibleAtNinetyNinePercent) {
    const TwoBus tb;
    const auto rep = tb.solve(0.99);
    EXPECT_EQ(rep.status, SolveStatus::Infeasible);
    EXPECT_EQ(rep.failed_iteration, 1);
    EXPECT_FALSE(rep.has_solution());
}

TEST(AcsRun, TwoBusNeedsRebalanceAtNinetyEightPercent) {
    const TwoBus tb;
    const auto rep = tb.solve(0.98);
    ASSERT_TRUE(rep.has_solution()) << rep.message;
    EXPECT_GE(rep.rebalance_rounds, 1);
    AcsConfig plain = tb.cfg.acs;
    plain.rebalance_on_infeasible_start = false;
    EXPECT_EQ(tb.solve(0.98, plain).status, SolveStatus::Infeasible);
}

TEST(AcsRun, SameControllerEveryStep) {
    const TwoBus tb("two_bus_horizon4.json");
    for (double p : {0.84, 0.90}) {
        const auto rep = tb.solve(p);
        ASSERT_TRUE(rep.has_solution()) << p << " " << rep.message;
        for (Eigen::Index k = 1; k < 4; ++k)
            EXPECT_LE((rep.U.segment(2 * k, 2) - rep.U.head(2)).cwiseAbs().maxCoeff(), 1e-4) << p;
    }
}

TEST(AcsRun, TightPolicyAlsoCertifies) {
    const TwoBus tb;
    AcsConfig acs = tb.cfg.acs;
    acs.step_policy = LambdaStepPolicy::Tight;
    const auto rep = tb.solve(0.90, acs);
    ASSERT_TRUE(rep.has_solution()) << rep.message;
    EXPECT_TRUE(rep.feasibility->feasible);
}

TEST(AcsRun, RestartFromReturnedLambdaIsAFixedPoint) {
    const TwoBus tb;
    const auto rep = tb.solve(0.90);
    ASSERT_TRUE(rep.has_solution());
    const auto spec = tb.cfg.system();
    const auto rows = build_reformulation(spec, tb.cfg.constraint(0.10), tb.cfg.attestation);
    const auto again = u_step(spec, rows, rep.allocation, tb.cfg.cost(), tb.cfg.acs.inner);
    ASSERT_EQ(again.status, SolverStatus::Optimal);
    EXPECT_LE((again.U - rep.U).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, rep.U.cwiseAbs().maxCoeff()));
}

TEST(AcsRun, UserSuppliedLambdas) {
    const TwoBus tb;
    AcsConfig acs = tb.cfg.acs;
    acs.init_policy = LambdaInitPolicy::UserSupplied;
    acs.user_lambdas = {risk_to_lambda(0.1), risk_to_lambda(0.05)};
    const auto rep = tb.solve(0.84, acs);
    ASSERT_TRUE(rep.has_solution());
    acs.user_lambdas = {risk_to_lambda(0.1), risk_to_lambda(0.1)};  // over budget
    EXPECT_THROW(tb.solve(0.84, acs), DomainError);
}

TEST(AcsRun, RefusesWithoutAttestation) {
    const TwoBus tb;
    EXPECT_THROW(run(tb.cfg.system(), tb.cfg.constraint(), tb.cfg.cost(), {true, false}), AssumptionNotAttested);
}
