#include <benchmark/benchmark.h>

#include "riskplan/sos_certifier.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

namespace {

EllipsoidRegion ball(const Eigen::Vector3d& center, double radius) {
  EllipsoidRegion e;
  e.center = center;
  e.shape = Eigen::Matrix3d::Identity() / (radius * radius);
  return e;
}

}  // namespace

static void BM_CertifySphereContour(benchmark::State& state) {
  const auto sphere = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const RiskContourMap map = build_contour_map({sphere}, 0.3, {-3, -3, -3}, {3, 3, 3});
  const EllipsoidRegion e = ball({5.0, 0.0, 0.0}, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_ellipsoid(map, e));
  }
}
BENCHMARK(BM_CertifySphereContour)->Unit(benchmark::kMillisecond);

static void BM_CertifyHeartContour(benchmark::State& state) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContourMap map = build_contour_map({heart}, 0.3, {-1, -1, -1}, {1, 1, 1});
  const EllipsoidRegion e = ball({0.8, 0.0, 0.0}, 0.08);
  for (auto _ : state) {
    benchmark::DoNotOptimize(certify_ellipsoid(map, e));
  }
}
BENCHMARK(BM_CertifyHeartContour)->Unit(benchmark::kMillisecond)->Iterations(5);

static void BM_BuildHeartProblem(benchmark::State& state) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(heart, 0.3);
  const EllipsoidRegion e = ball({0.8, 0.0, 0.0}, 0.08);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_certificate_problem(c, e));
  }
}
BENCHMARK(BM_BuildHeartProblem)->Unit(benchmark::kMillisecond);

static void BM_SampleFalsify(benchmark::State& state) {
  const auto sphere = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const RiskContourMap map = build_contour_map({sphere}, 0.3, {-3, -3, -3}, {3, 3, 3});
  const EllipsoidRegion e = ball({2.0, 0.3, 0.0}, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_falsify(map, e, 64, 7));
  }
}
BENCHMARK(BM_SampleFalsify);
