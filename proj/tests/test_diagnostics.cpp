#include "gradnewton/diagnostics.hpp"
#include "gradnewton/fixtures.hpp"
#include "gradnewton/problems.hpp"
#include "gradnewton/trace_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace gradnewton;

TEST(GammaBound, Examples) {
  EXPECT_DOUBLE_EQ(gamma_bound(1.0, 1.0, 2.0, 0.1), 0.05);
  EXPECT_EQ(gamma_bound(0.0, 1.0, 2.0, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(gamma_bound(2.0, 1.0, 1.0, 0.3), 1.0);
}

TEST(GammaBound, MonotoneInEtaAndM) {
  double prev = -1.0;
  for (double eta = 0.0; eta <= 5.0; eta += 0.25) {
    const double g = gamma_bound(eta, 1.0, 3.0, 0.1);
    EXPECT_GT(g, prev);
    prev = g;
  }
  prev = 0.0;
  for (double m = 0.1; m <= 3.0; m += 0.1) {
    const double g = gamma_bound(1.0, m, 3.0, 0.2);
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(GammaBound, RejectsBadArguments) {
  EXPECT_THROW(gamma_bound(1.0, 2.0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(gamma_bound(1.0, 1.0, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(gamma_bound(-1.0, 1.0, 1.0, 0.1), std::invalid_argument);
}

TEST(EtaThreshold, Examples) {
  EXPECT_DOUBLE_EQ(eta_threshold(1.0, 1.0, 0.1), 0.64);
  EXPECT_NEAR(eta_threshold(1.0, 1.0, 0.5 - 1e-12), 0.0, 1e-11);
  EXPECT_EQ(eta_threshold(1.0, 0.0, 0.1), std::numeric_limits<double>::infinity());
  EXPECT_THROW(eta_threshold(1.0, 1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(eta_threshold(1.0, 1.0, 0.7), std::invalid_argument);
  EXPECT_THROW(eta_threshold(0.0, 1.0, 0.1), std::invalid_argument);
}

TEST(EtaThreshold, Monotonicity) {
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha = 0.01; alpha < 0.5; alpha += 0.02) {
    const double e = eta_threshold(1.0, 1.0, alpha);
    EXPECT_LT(e, prev);
    prev = e;
  }
  prev = 0.0;
  for (double m = 0.1; m < 4.0; m += 0.1) {
    const double e = eta_threshold(m, 2.0, 0.1);
    EXPECT_GT(e, prev);
    prev = e;
  }
  prev = std::numeric_limits<double>::infinity();
  for (double l = 0.1; l < 4.0; l += 0.1) {
    const double e = eta_threshold(1.0, l, 0.1);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(EstimateBounds, QuadraticHasZeroLipschitz) {
  QuadraticProblem q(Eigen::Vector2d(1, 4).asDiagonal(), Vector::Zero(2));
  const auto b = estimate_bounds(q, {Eigen::Vector2d(1, 1), Eigen::Vector2d(-2, 3), Eigen::Vector2d(0, 0)},
                                 ConstraintSpec::none());
  EXPECT_NEAR(b.m, 1.0, 1e-14);
  EXPECT_NEAR(b.M, 4.0, 1e-14);
  EXPECT_EQ(b.L, 0.0);
}

TEST(EstimateBounds, CubicTrajectory) {
  // f'' = 2 + 0.6 x on [-0.5, 0]: m >= 1.7, M <= 2, f''' = 0.6 exactly.
  CubicCounterexample c(0.1);
  const auto r = solve(c, Point::Constant(1, -0.5));
  ASSERT_TRUE(r.converged());
  const auto b = estimate_bounds(c, r);
  EXPECT_GE(b.m, 1.7 - 1e-12);
  EXPECT_LE(b.M, 2.0 + 0.6 * 0.05);
  EXPECT_NEAR(b.L, 0.6, 1e-9);
}

TEST(EstimateBounds, SinglePointAndErrors) {
  CubicCounterexample c(0.1);
  const auto b = estimate_bounds(c, {Point::Constant(1, 0.0)}, ConstraintSpec::none());
  EXPECT_DOUBLE_EQ(b.m, 2.0);
  EXPECT_EQ(b.L, 0.0);
  EXPECT_THROW(estimate_bounds(c, {}, ConstraintSpec::none()), std::invalid_argument);
}

TEST(AuditDescent, FillsEnergyAndIsMonotone) {
  auto fx = *make_fixture("logsumexp-std");
  auto oracle = fx.make();
  auto r = solve(*oracle, fx.default_start);
  ASSERT_TRUE(r.converged());
  const auto audit = audit_descent(*oracle, r);
  EXPECT_TRUE(audit.from_energy);
  EXPECT_TRUE(audit.monotone());
  ASSERT_EQ(audit.decrease.size(), r.trace.size());
  for (const auto& rec : r.trace) EXPECT_TRUE(rec.energy.has_value());
}

TEST(AuditDescent, PathIntegralWithoutEnergy) {
  auto fx = *make_fixture("conformal-ico");
  auto oracle = fx.make();
  auto r = solve(*oracle, fx.default_start);
  ASSERT_TRUE(r.converged());
  const auto audit = audit_descent(*oracle, r);
  EXPECT_FALSE(audit.from_energy);
  EXPECT_TRUE(audit.monotone());
  EXPECT_EQ(oracle->counters().energy_evals, 0u);
}

TEST(Classify, QuadraticConvergesInOneFullStep) {
  auto fx = *make_fixture("quadratic-diag");
  auto oracle = fx.make();
  SolverConfig cfg;
  auto r = solve(*oracle, fx.default_start, cfg);
  const auto b = estimate_bounds(*oracle, r);
  const auto audit = audit_descent(*oracle, r);
  const auto rep = classify_convergence(r, b, cfg, &audit);
  ASSERT_TRUE(rep.k0.has_value());
  EXPECT_EQ(*rep.k0, 0u);
  EXPECT_FALSE(rep.quadratic_fit_sufficient);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_EQ(rep.eta_threshold, std::numeric_limits<double>::infinity());
}

TEST(Classify, CubicWithFirstConditionReachesFullSteps) {
  CubicCounterexample c(0.1);
  SolverConfig cfg;
  auto r = solve(c, Point::Constant(1, -0.5), cfg);
  const auto b = estimate_bounds(c, r);
  const auto audit = audit_descent(c, r);
  const auto rep = classify_convergence(r, b, cfg, &audit);
  ASSERT_TRUE(rep.k0.has_value());
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_TRUE(rep.full_step_violations.empty());
}

TEST(Classify, CubicSignOnlyIsLinearAtRateOneHalf) {
  CubicCounterexample c(0.1);
  SolverConfig cfg;
  cfg.use_first_condition = false;
  auto r = solve(c, Point::Constant(1, -0.5), cfg);
  ASSERT_TRUE(r.converged());
  const auto b = estimate_bounds(c, r);
  const auto rep = classify_convergence(r, b, cfg);
  EXPECT_FALSE(rep.k0.has_value());
  EXPECT_EQ(rep.damped_iterations, r.trace.size());
  ASSERT_TRUE(rep.linear_rate.has_value());
  EXPECT_NEAR(*rep.linear_rate, 0.5, 1e-3);
}

TEST(Classify, QuadraticFitOnLogSumExp) {
  auto fx = *make_fixture("logsumexp-std");
  auto oracle = fx.make();
  SolverConfig cfg;
  cfg.epsilon = 1e-14;
  auto r = solve(*oracle, Point::Constant(10, 2.0), cfg);
  ASSERT_TRUE(r.converged());
  const auto rep = classify_convergence(r, estimate_bounds(*oracle, r), cfg);
  if (rep.quadratic_fit_sufficient) {
    EXPECT_GE(*rep.exponent, 1.8);
  }
}

TEST(Classify, ReportJsonFields) {
  CubicCounterexample c(0.1);
  SolverConfig cfg;
  auto r = solve(c, Point::Constant(1, -0.5), cfg);
  const auto b = estimate_bounds(c, r);
  const auto audit = audit_descent(c, r);
  const auto j = to_json(classify_convergence(r, b, cfg, &audit), b);
  for (const char* key : {"m", "M", "L", "k0", "C", "violations", "eta_threshold", "quadratic_fit"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["violations"].is_array());
}

TEST(GradientNoise, RoundOffScaleAndRescuesTheRateFit) {
  QuadraticProblem q(Eigen::Vector2d(1, 4).asDiagonal(), Vector::Zero(2));
  const double nz = estimate_gradient_noise(q, Eigen::Vector2d(0.0, 0.0), ConstraintSpec::none());
  EXPECT_GT(nz, 0.0);
  EXPECT_LT(nz, 1e-14);

  // A final norm near 5e-13 is signal, not round-off, for log-sum-exp.
  auto fx = *make_fixture("logsumexp-std");
  std::mt19937_64 rng(303);
  for (int i = 0; i < 20; ++i) {
    auto oracle = fx.make();
    SolverConfig cfg;
    const auto r = solve(*oracle, i == 0 ? fx.default_start : fx.sample_start(rng), cfg);
    ClassifyOptions opt;
    opt.gradient_noise = estimate_gradient_noise(*oracle, r);
    const auto rep = classify_convergence(r, estimate_bounds(*oracle, r), cfg, nullptr, opt);
    ASSERT_TRUE(rep.exponent.has_value());
    EXPECT_GE(*rep.exponent, 1.8);
  }
}
