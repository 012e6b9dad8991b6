#include "riskplan/risk_contour.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "riskplan/rng.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

namespace {

// Monte-Carlo estimates of E[o] and E[o^2] at a point.
std::pair<double, double> mc_moments_at(const UncertainObstacle& ob,
                                        const Eigen::Vector3d& pt, int n,
                                        std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0, sq = 0.0;
  std::vector<double> values = {pt.x(), pt.y(), pt.z(), 0.0};
  for (int i = 0; i < n; ++i) {
    values[3] = ob.omega.sample(rng);
    const double o = ob.poly.eval(values);
    sum += o;
    sq += o * o;
  }
  return {sum / n, sq / n};
}

double mc_collision_probability(const UncertainObstacle& ob, const Eigen::Vector3d& pt,
                                int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> values = {pt.x(), pt.y(), pt.z(), 0.0};
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    values[3] = ob.omega.sample(rng);
    if (ob.poly.eval(values) <= 0.0) ++hits;
  }
  return static_cast<double>(hits) / n;
}

}  // namespace

TEST(RiskContour, SphereMomentPolynomialsAreExact) {
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const RiskContour c = contour_from_obstacle(ob, 0.3);

  // p2 = x^2 + y^2 + z^2 - 7/3.
  EXPECT_EQ(c.p2.total_degree(), 2);
  EXPECT_NEAR(c.p2.coeff({2, 0, 0}), 1.0, 1e-14);
  EXPECT_NEAR(c.p2.coeff({0, 0, 0}), -7.0 / 3.0, 1e-14);
  // p1 = (x^2+y^2+z^2)^2 - 14/3 (x^2+y^2+z^2) + 31/5.
  EXPECT_EQ(c.p1.total_degree(), 4);
  EXPECT_NEAR(c.p1.coeff({4, 0, 0}), 1.0, 1e-14);
  EXPECT_NEAR(c.p1.coeff({2, 2, 0}), 2.0, 1e-14);
  EXPECT_NEAR(c.p1.coeff({2, 0, 0}), -14.0 / 3.0, 1e-14);
  EXPECT_NEAR(c.p1.coeff({0, 0, 0}), 31.0 / 5.0, 1e-13);
}

TEST(RiskContour, MomentPolynomialsMatchMonteCarlo) {
  const auto obstacles = {
      test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0)),
      test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1)),
      test::heart_obstacle(ScalarDistribution::gaussian(0.05, 0.01), "heart2"),
      test::sphere_obstacle(ScalarDistribution::beta(2.0, 2.0, 0.5, 1.5), {0.2, -0.1, 0.3}),
  };
  Rng rng(3);
  for (const auto& ob : obstacles) {
    const RiskContour c = contour_from_obstacle(ob, 0.2);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Vector3d pt(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                               rng.uniform(-1.0, 1.0));
      const auto [e1_mc, e2_mc] = mc_moments_at(ob, pt, 200000, 17 + trial);
      const double values[3] = {pt.x(), pt.y(), pt.z()};
      const double p2v = c.p2.eval(std::span<const double>(values, 3));
      const double p1v = c.p1.eval(std::span<const double>(values, 3));
      EXPECT_NEAR(p2v, e1_mc, 1e-2 * std::max(1.0, std::abs(e1_mc))) << ob.name;
      EXPECT_NEAR(p1v, e2_mc, 1e-2 * std::max(1.0, std::abs(e2_mc))) << ob.name;
    }
  }
}

TEST(RiskContour, DeterministicObstacleHasZeroVariance) {
  const auto ob =
      test::sphere_obstacle(ScalarDistribution::gaussian(1.0, 1e-12), {0, 0, 0}, "det");
  const RiskContour c = contour_from_obstacle(ob, 0.1);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const double values[3] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double p1v = c.p1.eval(std::span<const double>(values, 3));
    const double p2v = c.p2.eval(std::span<const double>(values, 3));
    EXPECT_NEAR(p1v, p2v * p2v, 1e-9 * std::max(1.0, std::abs(p1v)));
  }
}

TEST(RiskContour, HeartMeanPolynomialDropsZeroMeanNoise) {
  const auto ob = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(ob, 0.3);
  EXPECT_EQ(c.p2.total_degree(), 6);
  EXPECT_EQ(c.p1.total_degree(), 12);
  // The mean polynomial equals the heart surface with omega at its mean 0.
  Rng rng(9);
  std::vector<double> values4 = {0, 0, 0, 0.0};
  for (int trial = 0; trial < 10; ++trial) {
    const double values[3] = {rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                              rng.uniform(-0.4, 0.4)};
    values4[0] = values[0];
    values4[1] = values[1];
    values4[2] = values[2];
    EXPECT_NEAR(c.p2.eval(std::span<const double>(values, 3)), ob.poly.eval(values4), 1e-10);
  }
}

TEST(RiskContour, MembershipExamplesFromSphere) {
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const RiskContour c = contour_from_obstacle(ob, 0.3);

  const Membership far = contour_membership(c, {2.0, 0.0, 0.0});
  EXPECT_TRUE(far.safe);
  EXPECT_NEAR(far.risk_bound, 34.0 / 159.0, 1e-12);
  // The true collision probability at that point is 0, below the bound.
  EXPECT_LE(mc_collision_probability(ob, {2.0, 0.0, 0.0}, 100000, 2), far.risk_bound);

  const Membership center = contour_membership(c, {0.0, 0.0, 0.0});
  EXPECT_FALSE(center.safe);
  EXPECT_DOUBLE_EQ(center.risk_bound, 1.0);

  RiskContour tight = c;
  tight.delta = 0.01;
  const Membership distant = contour_membership(tight, {10.0, 0.0, 0.0});
  EXPECT_TRUE(distant.safe);
  EXPECT_LT(distant.risk_bound, 1e-3);
}

TEST(RiskContour, CantelliSoundnessSpotCheck) {
  // Wherever the contour reports safe, the true collision probability must
  // stay below delta (up to Monte-Carlo error).
  const std::vector<UncertainObstacle> obstacles = {
      test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0)),
      test::sphere_obstacle(ScalarDistribution::beta(2.0, 4.0, 0.8, 1.6), {0.5, 0, 0}),
      test::heart_obstacle(ScalarDistribution::gaussian(0.05, 0.01)),
  };
  Rng rng(23);
  const int n_mc = 100000;
  int tested = 0;
  for (const auto& ob : obstacles) {
    for (double delta : {0.1, 0.3}) {
      const RiskContour c = contour_from_obstacle(ob, delta);
      for (int trial = 0; trial < 40; ++trial) {
        const Eigen::Vector3d pt(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
        const Membership m = contour_membership(c, pt);
        if (!m.safe) continue;
        ++tested;
        const double p = mc_collision_probability(ob, pt, n_mc, 77 + trial);
        const double stderr3 = 3.0 * std::sqrt(std::max(p * (1 - p), 1e-9) / n_mc);
        EXPECT_LE(p, delta + stderr3) << ob.name << " at " << pt.transpose();
      }
    }
  }
  EXPECT_GT(tested, 30);
}

TEST(RiskContour, VarianceIdentityNonnegative) {
  const auto ob = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(ob, 0.3);
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const double values[3] = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                              rng.uniform(-0.5, 0.5)};
    const double p1v = c.p1.eval(std::span<const double>(values, 3));
    const double p2v = c.p2.eval(std::span<const double>(values, 3));
    EXPECT_GE(p1v - p2v * p2v, -1e-9);
  }
}

TEST(RiskContour, MapRiskTakesTheWorstBound) {
  const auto near = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0), {0, 0, 0});
  const auto far =
      test::sphere_obstacle(ScalarDistribution::uniform(0.5, 0.6), {5, 5, 5}, "far");
  const RiskContourMap map = build_contour_map({near, far}, 0.3, {-6, -6, -6}, {6, 6, 6});

  const Eigen::Vector3d pt(2.2, 0.0, 0.0);
  const double r_near = contour_membership(map.contours[0], pt).risk_bound;
  const double r_far = contour_membership(map.contours[1], pt).risk_bound;
  EXPECT_DOUBLE_EQ(map_risk(map, pt), std::max(r_near, r_far));

  EXPECT_DOUBLE_EQ(map_risk(RiskContourMap{}, pt), 0.0);
  EXPECT_DOUBLE_EQ(map_risk(map, Eigen::Vector3d::Zero()), 1.0);
}

TEST(RiskContour, DeltaOutsideRangeThrows) {
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  EXPECT_THROW(contour_from_obstacle(ob, -0.1), std::invalid_argument);
  EXPECT_THROW(contour_from_obstacle(ob, 1.1), std::invalid_argument);
}
