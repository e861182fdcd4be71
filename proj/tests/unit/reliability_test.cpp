#include "medguard/reliability.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include "test_support.hpp"

namespace {

using namespace medguard::reliability;
using medguard::Errc;
using medguard::testing::error_code_of;

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

CtmcModel random_irreducible_chain(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(0.1, 10.0);
  const std::size_t n = 3 + rng() % 3;
  std::vector<CtmcModel::Transition> ts;
  for (std::size_t i = 0; i < n; ++i) ts.push_back({i, (i + 1) % n, rate(rng)});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && j != (i + 1) % n && rng() % 2 == 0) ts.push_back({i, j, rate(rng)});
    }
  }
  return CtmcModel::from_transitions(n, ts);
}

std::vector<double> eigen_stationary(const CtmcModel& model) {
  const std::size_t n = model.size();
  Eigen::MatrixXd qt(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) qt(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = model.generator()(r, c);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(qt);
  lu.setThreshold(1e-12);
  const Eigen::MatrixXd kernel = lu.kernel();
  EXPECT_EQ(kernel.cols(), 1);
  Eigen::VectorXd v = kernel.col(0);
  v /= v.sum();
  return {v.data(), v.data() + v.size()};
}

TEST(ModelGraph, HasFifteenFailureAndTenRecoveryEdges) {
  EXPECT_EQ(failure_edges().size(), 15u);
  EXPECT_EQ(recovery_edges().size(), 10u);
  EXPECT_EQ(edge_kind(5, 11), RateKind::failure);
  EXPECT_EQ(edge_kind(12, 1), RateKind::recovery);
  EXPECT_FALSE(edge_kind(4, 9).has_value());
}

TEST(RateTable, TableOneLeavesOneEdgeDefaulted) {
  const RateTable t = RateTable::table_one();
  ASSERT_EQ(t.defaulted_edges().size(), 1u);
  EXPECT_EQ(t.defaulted_edges()[0], (Edge{5, 11}));
  EXPECT_EQ(t.rate(5, 11), 0.0);
  EXPECT_DOUBLE_EQ(t.rate(11, 12), 25.87e-3);
  EXPECT_EQ(t.time_unit, "hour");
}

TEST(RateTable, FileMatchesBuiltInTable) {
  const RateTable loaded = RateTable::load(MEDGUARD_RATES_FILE);
  EXPECT_EQ(loaded.rates(), RateTable::table_one().rates());
  EXPECT_EQ(RateTable::parse(loaded.serialize()).rates(), loaded.rates());
}

TEST(RateTable, RejectsUnknownEdgesAndNegativeRates) {
  RateTable t;
  EXPECT_EQ(error_code_of([&] { t.set_failure(4, 9, 1e-3); }), Errc::unknown_edge);
  EXPECT_EQ(error_code_of([&] { t.set_recovery(1, 2, 1e-3); }), Errc::unknown_edge);
  EXPECT_EQ(error_code_of([&] { t.set_failure(1, 2, -1e-3); }), Errc::negative_rate);
  EXPECT_EQ(error_code_of([&] { t.set_failure(1, 2, std::nan("")); }), Errc::negative_rate);
}

TEST(RateTable, ParseErrorsNameTheLine) {
  try {
    RateTable::parse("unit hour\nlambda 1 2 1e-3\nlambda 1 2 oops\n");
    FAIL();
  } catch (const medguard::Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code_of([] { RateTable::parse("lambda 4 9 1e-3\n"); }), Errc::unknown_edge);
}

TEST(Generator, RowFourHoldsOnlyTheRecoveryToNormal) {
  const CtmcModel m = build_generator(RateTable::table_one());
  const auto& q = m.generator();
  for (std::size_t c = 0; c < 12; ++c) {
    if (c == 0) EXPECT_DOUBLE_EQ(q(3, c), 98.76e-2);
    else if (c == 3) EXPECT_DOUBLE_EQ(q(3, c), -98.76e-2);
    else EXPECT_EQ(q(3, c), 0.0) << c;
  }
}

TEST(Generator, RowsSumToZero) {
  const CtmcModel m = build_generator(RateTable::table_one());
  for (std::size_t r = 0; r < 12; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 12; ++c) s += m.generator()(r, c);
    EXPECT_NEAR(s, 0.0, 1e-15);
  }
}

TEST(Generator, RejectsMalformedMatrices) {
  DenseMatrix q(2);
  q(0, 1) = 1.0;
  EXPECT_EQ(error_code_of([&] { CtmcModel::from_generator(q); }), Errc::invalid_argument);
  q(0, 0) = -1.0;
  EXPECT_NO_THROW(CtmcModel::from_generator(q));
  q(1, 0) = -1.0;
  q(1, 1) = 1.0;
  EXPECT_EQ(error_code_of([&] { CtmcModel::from_generator(q); }), Errc::negative_rate);
}

TEST(Transient, ZeroGeneratorLeavesDistributionUnchanged) {
  const CtmcModel m = build_generator(RateTable{});
  StateDistribution p0 = StateDistribution::uniform(12);
  const Trajectory tr = solve_transient(m, p0, {.horizon = 100.0, .step = 1.0});
  EXPECT_EQ(tr.final().p, p0.p);
  EXPECT_EQ(tr.steps, 100u);
}

TEST(Transient, TwoStateChainMatchesClosedForm) {
  const std::array<CtmcModel::Transition, 2> ts{{{0, 1, 1.0}, {1, 0, 1.0}}};
  const CtmcModel m = CtmcModel::from_transitions(2, ts);
  const Trajectory tr = solve_transient(m, StateDistribution::unit(2), {.horizon = 1.0, .step = 1e-3});
  // 1/2 + e^-2 / 2
  EXPECT_NEAR(tr.final().p[0], 0.5676676416183064, 1e-12);
}

TEST(Transient, StepIsShrunkToHitTheHorizon) {
  const std::array<CtmcModel::Transition, 2> ts{{{0, 1, 1.0}, {1, 0, 1.0}}};
  const CtmcModel m = CtmcModel::from_transitions(2, ts);
  const Trajectory tr = solve_transient(m, StateDistribution::unit(2), {.horizon = 1.0, .step = 0.3, .check_convergence = false});
  EXPECT_EQ(tr.steps, 4u);
  EXPECT_DOUBLE_EQ(tr.step, 0.25);
  EXPECT_DOUBLE_EQ(tr.final().t, 1.0);
}

TEST(Transient, OversizedStepIsReported) {
  const std::array<CtmcModel::Transition, 2> ts{{{0, 1, 100.0}, {1, 0, 100.0}}};
  const CtmcModel m = CtmcModel::from_transitions(2, ts);
  EXPECT_EQ(error_code_of([&] { solve_transient(m, StateDistribution::unit(2), {.horizon = 10.0, .step = 0.05}); }),
            Errc::step_too_large);
}

TEST(Transient, RejectsBadInitialDistribution) {
  const CtmcModel m = build_generator(RateTable::table_one());
  StateDistribution bad = StateDistribution::unit(12);
  bad.p[1] = 0.5;
  EXPECT_EQ(error_code_of([&] { solve_transient(m, bad, {.horizon = 1.0, .step = 0.1}); }), Errc::invalid_argument);
}

TEST(Transient, TableOneConservesMassAndPositivity) {
  const CtmcModel m = build_generator(RateTable::table_one());
  double worst_sum = 0;
  double lowest = 1;
  const Trajectory tr = solve_transient(m, StateDistribution::unit(12), {.horizon = 8760.0, .step = 0.25, .record_every = 0},
                                        [&](const StateDistribution& d) {
                                          worst_sum = std::max(worst_sum, std::abs(std::accumulate(d.p.begin(), d.p.end(), 0.0) - 1.0));
                                          lowest = std::min(lowest, *std::min_element(d.p.begin(), d.p.end()));
                                        });
  EXPECT_LE(worst_sum, 1e-9);
  EXPECT_GE(lowest, -1e-12);
  EXPECT_LE(tr.max_conservation_error, 1e-9);
  ASSERT_TRUE(tr.convergence_delta.has_value());
  EXPECT_LE(*tr.convergence_delta, 1e-8);
}

TEST(Transient, AvailabilityIsNonIncreasingEarly) {
  const CtmcModel m = build_generator(RateTable::table_one());
  const Trajectory tr = solve_transient(m, StateDistribution::unit(12), {.horizon = 200.0, .step = 0.25});
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    ASSERT_LE(tr.samples[i].p[0], tr.samples[i - 1].p[0] + 1e-15) << tr.samples[i].t;
  }
}

TEST(Transient, EndpointPowersMatchStepping) {
  const CtmcModel m = build_generator(RateTable::table_one());
  const Trajectory tr = solve_transient(m, StateDistribution::unit(12), {.horizon = 1000.0, .step = 0.25, .record_every = 0});
  const StateDistribution fast = transient_endpoint(m, StateDistribution::unit(12), 1000.0, 0.25);
  EXPECT_LE(max_abs_diff(fast.p, tr.final().p), 1e-13);
}

TEST(SteadyState, TwoStateFormula) {
  const double lambda = 3e-4, mu = 0.9;
  const std::array<CtmcModel::Transition, 2> ts{{{0, 1, lambda}, {1, 0, mu}}};
  const StateDistribution s = steady_state(CtmcModel::from_transitions(2, ts));
  EXPECT_NEAR(s.p[0], mu / (lambda + mu), 1e-10);
  EXPECT_NEAR(s.p[1], lambda / (lambda + mu), 1e-10);
}

TEST(SteadyState, SymmetricCycleIsUniform) {
  const std::array<CtmcModel::Transition, 3> ts{{{0, 1, 2.0}, {1, 2, 2.0}, {2, 0, 2.0}}};
  const StateDistribution s = steady_state(CtmcModel::from_transitions(3, ts));
  for (double v : s.p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-14);
}

TEST(SteadyState, ReducibleChainIsSingular) {
  const std::array<CtmcModel::Transition, 2> ts{{{0, 1, 1.0}, {1, 2, 1.0}}};
  const CtmcModel m = CtmcModel::from_transitions(3, ts);
  EXPECT_FALSE(is_irreducible(m));
  EXPECT_EQ(error_code_of([&] { steady_state(m); }), Errc::singular_system);
  EXPECT_EQ(error_code_of([&] { steady_state(build_generator(RateTable{})); }), Errc::singular_system);
}

TEST(SteadyState, TableOneMatchesNullspaceOracle) {
  const CtmcModel m = build_generator(RateTable::table_one());
  ASSERT_TRUE(is_irreducible(m));
  const StateDistribution s = steady_state(m);
  EXPECT_LT(balance_residual(m, s.p), 1e-10);
  EXPECT_LE(max_abs_diff(s.p, eigen_stationary(m)), 1e-8);
  check_distribution(s);
}

TEST(SteadyState, TableOneAgreesWithVeryLongTransient) {
  const CtmcModel m = build_generator(RateTable::table_one());
  const StateDistribution s = steady_state(m);
  const StateDistribution t = transient_endpoint(m, StateDistribution::unit(12), 1e10, 0.25);
  EXPECT_LE(max_abs_diff(s.p, t.p), 1e-6);
}

TEST(SteadyStateProperty, RandomChainsAgreeWithTransientAndOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const CtmcModel m = random_irreducible_chain(rng);
    const StateDistribution s = steady_state(m);
    const double step = 0.1 / m.max_exit_rate();
    const StateDistribution t = transient_endpoint(m, StateDistribution::unit(m.size()), 1e6 / m.max_exit_rate(), step);
    ASSERT_LE(max_abs_diff(s.p, t.p), 1e-6) << trial;
    ASSERT_LE(max_abs_diff(s.p, eigen_stationary(m)), 1e-8) << trial;
    ASSERT_LT(balance_residual(m, s.p), 1e-10) << trial;
  }
}

TEST(TransientProperty, RandomChainsStayNormalised) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const CtmcModel m = random_irreducible_chain(rng);
    const Trajectory tr = solve_transient(m, StateDistribution::unit(m.size()),
                                          {.horizon = 50.0, .step = 0.2 / m.max_exit_rate(), .record_every = 0});
    ASSERT_LE(tr.max_conservation_error, 1e-9);
    ASSERT_GE(tr.min_probability, -1e-12);
  }
}

TEST(Availability, ReadsTheNormalState) {
  EXPECT_EQ(availability(StateDistribution::unit(12)), 1.0);
  EXPECT_NEAR(availability(StateDistribution::uniform(12)), 1.0 / 12.0, 1e-15);
  StateDistribution ref;
  ref.p.assign(reference_distribution().begin(), reference_distribution().end());
  EXPECT_DOUBLE_EQ(availability(ref), 0.9925712);
}

TEST(ReferenceComparison, ReportsSteadyStateAndCrossing) {
  const ReferenceComparison c = compare_with_reference(build_generator(RateTable::table_one()));
  EXPECT_DOUBLE_EQ(c.target, 0.9925712);
  ASSERT_TRUE(c.t_star.has_value());
  ASSERT_TRUE(c.at_t_star.has_value());
  EXPECT_LE(std::abs(availability(*c.at_t_star) - c.target), c.band);
  EXPECT_LT(availability(c.steady), c.target - c.band);
}

}  // namespace
