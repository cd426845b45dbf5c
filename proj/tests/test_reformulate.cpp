#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "vpcc/vpcc.hpp"

using namespace vpcc;

TEST(VpBound, BoundaryLimitIsOneSixth) {
    EXPECT_DOUBLE_EQ(4.0 / (9.0 * (5.0 / 3.0 + 1.0)), 1.0 / 6.0);
    EXPECT_NEAR(vp_bound(kVpLambdaMin + 1e-12), 1.0 / 6.0, 1e-12);
    EXPECT_LT(vp_bound(kVpLambdaMin + 1e-12), 1.0 / 6.0);
    EXPECT_THROW(vp_bound(kVpLambdaMin), DomainError);
    EXPECT_THROW(vp_bound(1.0), DomainError);
}

TEST(VpBound, Values) {
    EXPECT_NEAR(vp_bound(2.0), 4.0 / 45.0, 1e-16);
    EXPECT_NEAR(vp_bound(6.5912), 0.01, 1e-5);
    EXPECT_EQ(vp_bound(std::numeric_limits<double>::infinity()), 0.0);
}

TEST(VpBound, StrictlyDecreasingAndConvex) {
    const double lo = kVpLambdaMin + 1e-6;
    const double h = 0.01;
    for (int i = 0; i < 2000; ++i) {
        const double x = lo + h * (i + 1);
        const double f0 = vp_bound(x - h), f1 = vp_bound(x), f2 = vp_bound(x + h);
        EXPECT_LT(f1, f0);
        EXPECT_GE(f0 - 2.0 * f1 + f2, -1e-15);
    }
}

TEST(RiskToLambda, Values) {
    EXPECT_NEAR(risk_to_lambda(4.0 / 45.0), 2.0, 1e-14);
    EXPECT_NEAR(risk_to_lambda(0.01), std::sqrt(4.0 / 0.09 - 1.0), 1e-14);
    EXPECT_NEAR(risk_to_lambda(0.01), 6.5912, 1e-4);
    EXPECT_NEAR(risk_to_lambda(1.0 / 6.0 - 1e-15), kVpLambdaMin, 1e-6);
    EXPECT_THROW(risk_to_lambda(1.0 / 6.0), DomainError);
    EXPECT_THROW(risk_to_lambda(0.0), DomainError);
}

TEST(RiskToLambda, RoundTripOnGrid) {
    for (int i = 0; i < 1000; ++i) {
        const double lambda = kVpLambdaMin + 1e-6 + 0.05 * i;
        EXPECT_LE(std::abs(risk_to_lambda(vp_bound(lambda)) - lambda), 1e-12 * std::max(1.0, lambda)) << lambda;
        const double omega = (i + 0.5) / 1000.0 * kMaxAlpha;
        EXPECT_LE(std::abs(vp_bound(risk_to_lambda(omega)) - omega), 1e-12) << omega;
    }
}

namespace {

JointChanceConstraint single_row(double h, std::size_t k, double alpha = 0.1) {
    JointChanceConstraint j;
    j.alpha = alpha;
    j.rows.push_back({RowVector::Ones(1), h, k, "r"});
    return j;
}

const Attestation kAttested{true, true};

}  // namespace

TEST(BuildReformulation, RequiresAttestation) {
    const auto spec = oracle::scalar_coin_system(2);
    EXPECT_THROW(build_reformulation(spec, single_row(10.0, 2), {true, false}), AssumptionNotAttested);
    EXPECT_THROW(build_reformulation(spec, single_row(10.0, 2), {false, true}), AssumptionNotAttested);
    EXPECT_NO_THROW(build_reformulation(spec, single_row(10.0, 2), kAttested));
}

TEST(BuildReformulation, ValidatesAlphaAndRows) {
    const auto spec = oracle::scalar_coin_system(2);
    EXPECT_THROW(build_reformulation(spec, single_row(10.0, 2, 1.0 / 6.0), kAttested), DomainError);
    EXPECT_THROW(build_reformulation(spec, single_row(10.0, 3), kAttested), DimensionError);
    EXPECT_THROW(build_reformulation(spec, single_row(10.0, 0), kAttested), DimensionError);
}

TEST(BuildReformulation, ScalarRowHolds) {
    const auto spec = oracle::scalar_coin_system(2);
    const auto rows = build_reformulation(spec, single_row(10.0, 2), kAttested);
    Vector U(2);
    U << 1.0, 0.0;
    EXPECT_NEAR(rows[0].slack(U, 2.0), 10.0 - 2.0 - 2.0 * std::sqrt(6.0), 1e-12);
    EXPECT_GT(rows[0].slack(U, 2.0), 0.0);
}

TEST(BuildReformulation, DeterministicRowsIgnoreLambda) {
    Matrix A(1, 1);
    A << 0.5;
    const auto spec = make_time_invariant(RandomMatrixModel::deterministic(A), 2, Matrix::Ones(1, 1), Vector::Ones(1));
    const auto rows = build_reformulation(spec, single_row(1.0, 2), kAttested);
    Vector U = Vector::Zero(2);
    EXPECT_TRUE(rows[0].moments.deterministic());
    EXPECT_DOUBLE_EQ(rows[0].slack(U, 5.0), 1.0 - 0.25);
    EXPECT_DOUBLE_EQ(rows[0].slack(U, kInfiniteLambda), 1.0 - 0.25);
}

TEST(BuildReformulation, TwoBusBalanceRow) {
    const auto cfg = load_config(VPCC_CONFIG_DIR "/two_bus.json");
    const auto rows = build_reformulation(cfg.system(), cfg.constraint(), cfg.attestation);
    ASSERT_EQ(rows.size(), 2u);
    Vector U(2);
    U << 100.0, 50.0;
    const double cw = 0.8130, cl = 1600.0;
    EXPECT_NEAR(rows[0].mean(U), 0.5 * cl - 118.9188 * cw - 150.0, 1e-3 * cw);
    const double var = rows[0].stddev(U) * rows[0].stddev(U);
    EXPECT_NEAR(var, 204.6946 * cw * cw + 0.0024752 * cl * cl, 0.05 * cw * cw + 1e-7 * cl * cl);
}

TEST(CheckFeasibility, Verdicts) {
    const auto spec = oracle::scalar_coin_system(2);
    const auto rows = build_reformulation(spec, single_row(10.0, 2, 0.1), kAttested);
    Vector U(2);
    U << 1.0, 0.0;
    RiskAllocation ok{{"r"}, {2.5}};
    auto rep = check_feasibility(rows, U, ok, 0.1, 1e-9);
    EXPECT_TRUE(rep.slacks_ok);
    EXPECT_TRUE(rep.allocation_valid);
    EXPECT_TRUE(rep.feasible);  // risk 4/(9*7.25) = 0.0613

    RiskAllocation greedy{{"r"}, {2.0}};
    EXPECT_FALSE(check_feasibility(rows, U, greedy, 0.05, 1e-9).feasible);  // risk 0.0889 > 0.05

    RiskAllocation low{{"r"}, {1.0}};
    rep = check_feasibility(rows, U, low, 0.1, 1e-9);
    EXPECT_FALSE(rep.allocation_valid);
    EXPECT_FALSE(rep.feasible);

    RiskAllocation tight{{"r"}, {4.0}};
    EXPECT_FALSE(check_feasibility(rows, U, tight, 0.1, 1e-9).slacks_ok);  // 2 + 4 sqrt(6) > 10

    RiskAllocation inf{{"r"}, {kInfiniteLambda}};
    EXPECT_FALSE(check_feasibility(rows, U, inf, 0.1, 1e-9).feasible);  // nonzero spread
}
