#include <benchmark/benchmark.h>

#include "riskplan/sim_env.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

static void BM_HeartContourEval(benchmark::State& state) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(heart, 0.3);
  const Eigen::Vector3d pt(0.21, -0.13, 0.08);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contour_membership(c, pt));
  }
}
BENCHMARK(BM_HeartContourEval);

static void BM_SphereContourEval(benchmark::State& state) {
  const auto sphere = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const RiskContour c = contour_from_obstacle(sphere, 0.3);
  const Eigen::Vector3d pt(2.1, 0.4, -0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(contour_membership(c, pt));
  }
}
BENCHMARK(BM_SphereContourEval);

static void BM_ContourFromHeart(benchmark::State& state) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(contour_from_obstacle(heart, 0.3));
  }
}
BENCHMARK(BM_ContourFromHeart);

static void BM_CollisionCost(benchmark::State& state) {
  const RobotModel robot = test::planar3_robot();
  const auto sphere =
      test::sphere_obstacle(ScalarDistribution::uniform(0.08, 0.12), {0.6, 0.74, 0.0});
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContourMap map =
      build_contour_map({sphere, heart}, 0.15, {-1.5, -1.5, -0.5}, {1.5, 1.5, 0.5});
  Eigen::VectorXd q(3);
  q << 0.4, 0.3, -0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(collision_cost(q, robot.chain, robot.ellipsoids, map, 10.0));
  }
}
BENCHMARK(BM_CollisionCost);
