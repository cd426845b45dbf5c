#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "vpcc/vpcc.hpp"

using namespace vpcc;

namespace {

ProblemConfig two_bus() { return load_config(VPCC_CONFIG_DIR "/two_bus.json"); }

SolveReport scenario_at(const ProblemConfig& cfg, double alpha, std::uint64_t seed,
                        std::optional<std::size_t> count = std::nullopt) {
    auto sc = cfg.scenario_config(alpha);
    sc.seed = seed;
    sc.sample_count = count;
    return solve_scenario(cfg.system(), cfg.constraint(alpha), cfg.cost(), sc);
}

}  // namespace

TEST(RequiredSamples, Counts) {
    EXPECT_EQ(required_samples(0.16, 0.001), 112u);
    EXPECT_EQ(required_samples(0.01, 0.001), 1782u);
    EXPECT_EQ(required_samples(1.0, std::exp(-1.0)), 6u);
    EXPECT_THROW(required_samples(0.0, 0.001), DomainError);
    EXPECT_THROW(required_samples(0.1, 1.0), DomainError);
}

TEST(RequiredSamples, CeilingOfTheBound) {
    for (double alpha : {0.01, 0.02, 0.05, 0.1, 0.16}) {
        const double bound = (2.0 / alpha) * (std::log(1000.0) + 2.0);
        const auto ns = required_samples(alpha, 0.001);
        EXPECT_GE(static_cast<double>(ns), bound);
        EXPECT_LT(static_cast<double>(ns) - 1.0, bound);
    }
}

TEST(ScenarioRows, MatchSimulatedStates) {
    std::mt19937_64 rng(3);
    const auto spec = oracle::random_finite_system(rng, 2, 3, 1);
    JointChanceConstraint jcc;
    jcc.alpha = 0.1;
    jcc.rows.push_back({(RowVector(2) << 1.0, -0.5).finished(), 0.7, 2, "a"});
    jcc.rows.push_back({(RowVector(2) << 0.2, 1.0).finished(), -0.3, 3, "b"});
    Rng draw = make_stream(4, 0);
    const auto draws = draw_trajectory(spec, draw);
    const auto rows = scenario_rows(spec, jcc, draws);
    const Vector U = (Vector(3) << 0.4, -1.0, 2.0).finished();
    for (std::size_t i = 0; i < 2; ++i) {
        const double gx = jcc.rows[i].G.dot(oracle::state_at(spec, draws, jcc.rows[i].k, U));
        EXPECT_NEAR(rows.coef.row(static_cast<Eigen::Index>(i)).dot(U) - rows.rhs(static_cast<Eigen::Index>(i)),
                    gx - jcc.rows[i].h, 1e-12);
    }
}

TEST(Scenario, DeterministicSpecIsNominalQp) {
    Matrix A(1, 1);
    A << 0.5;
    InputPolytope poly{(Matrix(2, 1) << 1.0, -1.0).finished(), Vector::Constant(2, 5.0)};
    const auto spec = make_time_invariant(RandomMatrixModel::deterministic(A), 2, Matrix::Ones(1, 1), Vector::Ones(1), poly);
    JointChanceConstraint jcc;
    jcc.alpha = 0.1;
    jcc.rows.push_back({RowVector::Ones(1), -1.0, 2, "x2"});  // 0.25 + 0.5 u0 + u1 <= -1
    const auto cost = QuadraticCost::time_invariant(Matrix::Ones(1, 1), Vector::Zero(1), 2);
    ScenarioConfig sc;
    sc.alpha = 0.1;
    sc.sample_count = 50;
    const auto rep = solve_scenario(spec, jcc, cost, sc);
    ASSERT_EQ(rep.status, SolveStatus::Optimal);
    EXPECT_EQ(rep.scenario->constraint_count, 1u);  // every sample identical
    // min u0^2 + u1^2 s.t. 0.5 u0 + u1 <= -1.25: u = -1.25 (0.5, 1) / 1.25
    EXPECT_NEAR(rep.U(0), -0.5, 1e-5);
    EXPECT_NEAR(rep.U(1), -1.0, 1e-5);
}

TEST(Scenario, TwoBusFeasibleAcrossRiskLevels) {
    const auto cfg = two_bus();
    for (double alpha : {0.16, 0.05, 0.01}) {
        const auto rep = scenario_at(cfg, alpha, 1);
        ASSERT_EQ(rep.status, SolveStatus::Optimal) << alpha << " " << rep.message;
        EXPECT_EQ(rep.scenario->sample_count, required_samples(alpha, 0.001));
    }
}

TEST(Scenario, ReportNoteExplainsTheOneSampleGap) {
    const auto rep = scenario_at(two_bus(), 0.01, 1);
    EXPECT_EQ(rep.scenario->sample_count, 1782u);
    EXPECT_NE(rep.scenario->note.find("1781"), std::string::npos);
    EXPECT_NE(rep.scenario->note.find("1782"), std::string::npos);
}

TEST(Scenario, BitwiseReproducible) {
    const auto cfg = two_bus();
    const auto a = scenario_at(cfg, 0.05, 17);
    const auto b = scenario_at(cfg, 0.05, 17);
    ASSERT_EQ(a.U.size(), b.U.size());
    for (Eigen::Index i = 0; i < a.U.size(); ++i) EXPECT_EQ(a.U(i), b.U(i));
    EXPECT_EQ(a.objective, b.objective);
    auto sc = cfg.scenario_config(0.05);
    sc.seed = 17;
    sc.threads = 3;
    const auto c = solve_scenario(cfg.system(), cfg.constraint(0.05), cfg.cost(), sc);
    for (Eigen::Index i = 0; i < a.U.size(); ++i) EXPECT_EQ(a.U(i), c.U(i));
}

TEST(Scenario, ObjectiveGrowsWithSampleCountOverSeeds) {
    const auto cfg = two_bus();
    auto median_cost = [&](std::size_t count) {
        std::vector<double> costs;
        for (std::uint64_t seed = 1; seed <= 21; ++seed) costs.push_back(scenario_at(cfg, 0.05, seed, count).objective);
        std::nth_element(costs.begin(), costs.begin() + 10, costs.end());
        return costs[10];
    };
    const double c20 = median_cost(20), c200 = median_cost(200), c2000 = median_cost(2000);
    EXPECT_LE(c20, c200);
    EXPECT_LE(c200, c2000);
}

TEST(Scenario, SamplerRequired) {
    RandomMatrixModel a(1);
    a.set(0, 0, RandomEntry(DistributionSpec(MomentsOnly{{1.0, 2.0}})));
    const auto spec = make_time_invariant(a, 1, Matrix::Ones(1, 1), Vector::Ones(1));
    JointChanceConstraint jcc;
    jcc.alpha = 0.1;
    jcc.rows.push_back({RowVector::Ones(1), 5.0, 1, "x"});
    ScenarioConfig sc;
    sc.alpha = 0.1;
    EXPECT_THROW(solve_scenario(spec, jcc, QuadraticCost::time_invariant(Matrix::Ones(1, 1), Vector::Zero(1), 1), sc),
                 SamplerMissing);
}
