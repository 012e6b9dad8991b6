#include "riskplan/sim_env.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_helpers.hpp"

using namespace riskplan;

namespace {

SimConfig noiseless(double dt = 0.1) {
  SimConfig cfg;
  cfg.dt = dt;
  cfg.noise = ProcessNoise::none();
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST(TrueStep, ZeroControlZeroNoiseIsAFixedPoint) {
  const auto robot = test::planar3_robot();
  JointState x = JointState::zero(3);
  x.q << 0.4, -0.2, 0.1;
  const JointState next = true_step(x, Eigen::VectorXd::Zero(3), noiseless(), robot.limits, 0);
  EXPECT_EQ(next.q, x.q);
  EXPECT_TRUE(next.qdot.isZero());
}

TEST(TrueStep, IntegratesCommandedVelocity) {
  const auto robot = test::planar3_robot();
  const JointState x = JointState::zero(3);
  Eigen::VectorXd u(3);
  u << 1.0, 0.0, 0.0;
  const JointState next = true_step(x, u, noiseless(0.1), robot.limits, 0);
  EXPECT_NEAR(next.q(0), 0.1, 1e-15);
  EXPECT_NEAR(next.qdot(0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(next.q(1), 0.0);
}

TEST(TrueStep, ClipsControlAndPosition) {
  const auto robot = test::planar3_robot();
  JointState x = JointState::zero(3);
  x.q(0) = robot.limits.q_max(0) - 0.01;
  Eigen::VectorXd u(3);
  u << 100.0, 0.0, 0.0;
  const JointState next = true_step(x, u, noiseless(1.0), robot.limits, 0);
  EXPECT_DOUBLE_EQ(next.qdot(0), robot.limits.u_max(0));
  EXPECT_DOUBLE_EQ(next.q(0), robot.limits.q_max(0));
}

TEST(TrueStep, BiasedNoiseDriftsAtTheConfiguredMean) {
  const auto robot = test::planar3_robot();
  SimConfig cfg = noiseless();
  cfg.noise = ProcessNoise::iid(ScalarDistribution::gaussian(0.2, 0.2), 6);
  cfg.seed = 7;
  const JointState x = JointState::zero(3);
  const int n = 10000;
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(6);
  for (int i = 0; i < n; ++i) {
    const JointState next = true_step(x, Eigen::VectorXd::Zero(3), cfg, robot.limits, i);
    drift.head(3) += next.q;
    drift.tail(3) += next.qdot;
  }
  drift /= n;
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(drift(j), 0.2, 0.01) << "component " << j;
}

TEST(TrueStep, NoiseStatisticsMatchTheDistribution) {
  const auto robot = test::planar3_robot();
  SimConfig cfg = noiseless();
  cfg.noise = ProcessNoise::iid(ScalarDistribution::uniform(-0.1, 0.3), 6);
  cfg.seed = 11;
  const JointState x = JointState::zero(3);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const JointState next = true_step(x, Eigen::VectorXd::Zero(3), cfg, robot.limits, i);
    sum += next.q(0);
    sq += next.q(0) * next.q(0);
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.1, 0.02 * 0.1 + 1e-3);
  EXPECT_NEAR(std::sqrt(var), std::sqrt(0.4 * 0.4 / 12.0), 0.02 * 0.12);
}

TEST(TrueStep, BitwiseReproducible) {
  const auto robot = test::planar3_robot();
  SimConfig cfg = noiseless();
  cfg.noise = ProcessNoise::iid(ScalarDistribution::gaussian(0.05, 0.05), 6);
  cfg.seed = 3;
  JointState xa = JointState::zero(3), xb = JointState::zero(3);
  Eigen::VectorXd u(3);
  u << 0.3, -0.2, 0.5;
  for (int i = 0; i < 50; ++i) {
    xa = true_step(xa, u, cfg, robot.limits, i);
    xb = true_step(xb, u, cfg, robot.limits, i);
  }
  EXPECT_EQ(xa.q, xb.q);
  EXPECT_EQ(xa.qdot, xb.qdot);
}

TEST(CollisionCost, ZeroFarFromObstacles) {
  const auto robot = test::planar3_robot();
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(0.1, 0.2), {0, 2, 0});
  const auto map = build_contour_map({ob}, 0.3, {-3, -3, -3}, {3, 3, 3});
  EXPECT_DOUBLE_EQ(
      collision_cost(Eigen::VectorXd::Zero(3), robot.chain, robot.ellipsoids, map, 10.0), 0.0);
}

TEST(CollisionCost, PenetrationChargesRiskAndDepth) {
  const auto robot = test::planar3_robot();
  // Deterministic-ish sphere swallowing the arm tip.
  const auto ob =
      test::sphere_obstacle(ScalarDistribution::uniform(0.299, 0.301), {1.1, 0, 0}, "tip");
  const auto map = build_contour_map({ob}, 0.3, {-3, -3, -3}, {3, 3, 3});
  const double cost =
      collision_cost(Eigen::VectorXd::Zero(3), robot.chain, robot.ellipsoids, map, 10.0);
  // At least one sampled point sits deep inside: risk term ~1 plus depth.
  EXPECT_GT(cost, 10.0);
}

TEST(CollisionCost, SweepTurnsOnInsideThePenetrationInterval) {
  const auto robot = test::planar3_robot();
  const auto ob =
      test::sphere_obstacle(ScalarDistribution::uniform(0.15, 0.2), {0.9, 0.45, 0}, "mid");
  const auto map = build_contour_map({ob}, 0.3, {-3, -3, -3}, {3, 3, 3});
  // Swing the base joint; the arm passes through the obstacle for some
  // interval of angles and is free outside it.
  bool seen_positive = false;
  double prev = 0.0;
  double max_jump_outside = 0.0;
  for (int i = 0; i <= 200; ++i) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
    q(0) = -0.5 + i * (1.5 / 200);
    const double c = collision_cost(q, robot.chain, robot.ellipsoids, map, 10.0);
    if (c > 0.0) seen_positive = true;
    if (c == 0.0 && prev == 0.0) max_jump_outside = std::max(max_jump_outside, 0.0);
    prev = c;
  }
  EXPECT_TRUE(seen_positive);
  // Straight down the middle at q = atan2(0.45, 0.9) the arm penetrates.
  Eigen::VectorXd q_hit = Eigen::VectorXd::Zero(3);
  q_hit(0) = std::atan2(0.45, 0.9);
  EXPECT_GT(collision_cost(q_hit, robot.chain, robot.ellipsoids, map, 10.0), 0.0);
  // Far outside the interval the cost vanishes.
  Eigen::VectorXd q_free = Eigen::VectorXd::Zero(3);
  q_free(0) = -2.0;
  EXPECT_DOUBLE_EQ(collision_cost(q_free, robot.chain, robot.ellipsoids, map, 10.0), 0.0);
}

TEST(AtGoal, ClosedBall) {
  GoalRegion goal;
  goal.center = {1, 0, 0};
  goal.radius = 0.125;  // exactly representable, so the boundary test is exact
  EXPECT_TRUE(at_goal({1, 0, 0}, goal));
  EXPECT_TRUE(at_goal({1.125, 0, 0}, goal));
  EXPECT_FALSE(at_goal({1.125 + 1e-6, 0, 0}, goal));
}
