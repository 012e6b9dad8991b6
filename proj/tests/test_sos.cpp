#include "riskplan/sos_certifier.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "riskplan/rng.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

namespace {

EllipsoidRegion ball(const Eigen::Vector3d& center, double radius) {
  EllipsoidRegion e;
  e.center = center;
  e.shape = Eigen::Matrix3d::Identity() / (radius * radius);
  e.label = "ball";
  return e;
}

RiskContourMap sphere_map(double delta) {
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  return build_contour_map({ob}, delta, {-3, -3, -3}, {3, 3, 3});
}

// Dense interior sampling; certification must imply zero membership failures.
int count_unsafe_samples(const RiskContourMap& map, const EllipsoidRegion& e, int n) {
  Eigen::LLT<Eigen::Matrix3d> llt(e.shape);
  const Eigen::Matrix3d l_inv_t = llt.matrixL().toDenseMatrix().inverse().transpose();
  Rng rng(12345);
  int unsafe = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d u(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const double norm = u.norm();
    if (norm < 1e-12) continue;
    u *= std::cbrt(rng.uniform01()) / norm;
    if (!map_safe(map, e.center + l_inv_t * u)) ++unsafe;
  }
  return unsafe;
}

}  // namespace

TEST(SosProblem, GramBasisCountsForSphere) {
  const RiskContourMap map = sphere_map(0.3);
  const SosProblem problem = build_certificate_problem(map.contours[0], ball({0, 0, 0}, 1.0));
  // Risk condition target degree 4: free basis degree <= 2 (10 monomials),
  // domain multiplier basis degree <= 1 (4 monomials).
  EXPECT_EQ(problem.risk_condition.target.total_degree(), 4);
  EXPECT_EQ(problem.risk_condition.basis_free.size(), 10u);
  EXPECT_EQ(problem.risk_condition.basis_domain.size(), 4u);
  // Mean condition target degree 2.
  EXPECT_EQ(problem.mean_condition.target.total_degree(), 2);
  EXPECT_EQ(problem.mean_condition.basis_free.size(), 4u);
  EXPECT_EQ(problem.mean_condition.basis_domain.size(), 1u);
}

TEST(SosProblem, GramBasisCountsForHeart) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(heart, 0.3);
  const SosProblem problem = build_certificate_problem(c, ball({2, 0, 0}, 0.1));
  EXPECT_EQ(problem.risk_condition.target.total_degree(), 12);
  EXPECT_EQ(problem.risk_condition.basis_free.size(), 84u);  // deg <= 6 in 3 vars
  EXPECT_EQ(problem.risk_condition.basis_domain.size(), 56u);
}

TEST(SosProblem, DegreeCapThrows) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContour c = contour_from_obstacle(heart, 0.3);
  SosOptions opts;
  opts.max_contour_degree = 4;
  EXPECT_THROW(build_certificate_problem(c, ball({2, 0, 0}, 0.1), opts),
               std::invalid_argument);
}

TEST(SosCertifier, FarEllipsoidCertifiesAgainstSphere) {
  const RiskContourMap map = sphere_map(0.3);
  const EllipsoidRegion e = ball({5, 0, 0}, 0.1);
  const CertResult result = certify_ellipsoid(map, e);
  ASSERT_EQ(result.verdict, CertResult::Verdict::Certified);
  EXPECT_GE(result.margin, -1e-8);
  EXPECT_LE(result.residual, 1e-7);
  EXPECT_EQ(count_unsafe_samples(map, e, 10000), 0);
}

TEST(SosCertifier, PenetratingEllipsoidIsNotCertified) {
  const RiskContourMap map = sphere_map(0.3);
  const CertResult result = certify_ellipsoid(map, ball({0, 0, 0}, 0.1));
  EXPECT_EQ(result.verdict, CertResult::Verdict::NotCertified);
}

TEST(SosCertifier, ConstantPositiveTargetsCertify) {
  // A far-away deterministic obstacle gives strictly positive g2 on the
  // ellipsoid; constants are SOS.
  RiskContour c;
  c.delta = 0.3;
  c.source = "const";
  c.p2 = Polynomial::constant(2.0, {"x", "y", "z"});
  c.p1 = Polynomial::constant(4.2, {"x", "y", "z"});
  const CertResult result = sdp_feasibility_solve(build_certificate_problem(c, ball({0, 0, 0}, 1.0)));
  ASSERT_EQ(result.verdict, CertResult::Verdict::Certified);
}

TEST(SosCertifier, EmptyMapIsVacuouslyCertified) {
  const CertResult result = certify_ellipsoid(RiskContourMap{}, ball({0, 0, 0}, 1.0));
  EXPECT_EQ(result.verdict, CertResult::Verdict::Certified);
}

TEST(SosCertifier, ConjunctionTakesWorstContour) {
  const auto safe_ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const auto blocking =
      test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0), {5.0, 0.0, 0.0}, "blk");
  const RiskContourMap both =
      build_contour_map({safe_ob, blocking}, 0.3, {-6, -6, -6}, {6, 6, 6});
  // Ellipsoid at (5,0,0): fine against the origin sphere, inside the other.
  const CertResult result = certify_ellipsoid(both, ball({5, 0, 0}, 0.1));
  EXPECT_EQ(result.verdict, CertResult::Verdict::NotCertified);
  EXPECT_EQ(result.detail, "blk");

  // Two certifying contours: margin is the min of the two margins.
  const RiskContourMap pair = build_contour_map(
      {safe_ob, test::sphere_obstacle(ScalarDistribution::uniform(0.5, 0.8), {-4, 0, 0}, "s2")},
      0.3, {-6, -6, -6}, {6, 6, 6});
  const EllipsoidRegion probe = ball({2.5, 0, 0}, 0.1);
  const CertResult joint = certify_ellipsoid(pair, probe);
  ASSERT_EQ(joint.verdict, CertResult::Verdict::Certified);
  const CertResult first = certify_ellipsoid(
      build_contour_map({safe_ob}, 0.3, {-6, -6, -6}, {6, 6, 6}), probe);
  const CertResult second = certify_ellipsoid(
      build_contour_map({pair.contours[1].delta == 0.3
                             ? test::sphere_obstacle(ScalarDistribution::uniform(0.5, 0.8),
                                                     {-4, 0, 0}, "s2")
                             : test::sphere_obstacle(ScalarDistribution::uniform(0.5, 0.8),
                                                     {-4, 0, 0}, "s2")},
                        0.3, {-6, -6, -6}, {6, 6, 6}),
      probe);
  EXPECT_NEAR(joint.margin, std::min(first.margin, second.margin), 1e-9);
}

TEST(SosCertifier, IdentityReconstructionResidualSmall) {
  const RiskContourMap map = sphere_map(0.3);
  const SosProblem problem =
      build_certificate_problem(map.contours[0], ball({4, 1, 0}, 0.2));
  const CertResult result = sdp_feasibility_solve(problem);
  ASSERT_EQ(result.verdict, CertResult::Verdict::Certified);
  ASSERT_EQ(result.gram.size(), 4u);
  const double risk_residual = reconstruct_identity_residual(
      problem.risk_condition, result.gram[0], result.gram[1]);
  const double mean_residual = reconstruct_identity_residual(
      problem.mean_condition, result.gram[2], result.gram[3]);
  EXPECT_LE(risk_residual, 1e-6);
  EXPECT_LE(mean_residual, 1e-6);
}

TEST(SosCertifier, MonotoneInDelta) {
  const auto ob = test::sphere_obstacle(ScalarDistribution::uniform(1.0, 2.0));
  const EllipsoidRegion e = ball({2.6, 0, 0}, 0.25);
  bool certified_before = false;
  for (double delta : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const RiskContourMap map = build_contour_map({ob}, delta, {-3, -3, -3}, {3, 3, 3});
    const bool certified = certify_ellipsoid(map, e).certified();
    if (certified_before) EXPECT_TRUE(certified) << "delta=" << delta;
    certified_before = certified_before || certified;
  }
  EXPECT_TRUE(certified_before);
}

TEST(SosCertifier, ShrinkingACertifiedEllipsoidStaysCertified) {
  const RiskContourMap map = sphere_map(0.3);
  EllipsoidRegion e = ball({3.0, 0.5, -0.2}, 0.3);
  const CertResult big = certify_ellipsoid(map, e);
  ASSERT_EQ(big.verdict, CertResult::Verdict::Certified);
  e.shape *= 4.0;  // half the radii
  EXPECT_EQ(certify_ellipsoid(map, e).verdict, CertResult::Verdict::Certified);
}

TEST(SampleFalsify, FindsCounterexamplesAndIsDeterministic) {
  const RiskContourMap map = sphere_map(0.3);
  // Fully inside the obstacle: a counterexample must be found.
  const auto inside = sample_falsify(map, ball({0, 0, 0}, 0.2), 64, 9);
  ASSERT_TRUE(inside.has_value());
  EXPECT_FALSE(map_safe(map, *inside));
  // Certification must agree with the counterexample.
  EXPECT_EQ(certify_ellipsoid(map, ball({0, 0, 0}, 0.2)).verdict,
            CertResult::Verdict::NotCertified);

  // Far away: nothing found.
  EXPECT_FALSE(sample_falsify(map, ball({5, 0, 0}, 0.1), 256, 9).has_value());

  // Same seed, same answer; n = 1 draws a single deterministic point.
  const auto a = sample_falsify(map, ball({1.6, 0, 0}, 0.35), 1, 4);
  const auto b = sample_falsify(map, ball({1.6, 0, 0}, 0.35), 1, 4);
  ASSERT_EQ(a.has_value(), b.has_value());
  if (a) EXPECT_EQ(*a, *b);
}

TEST(SosCertifier, CertifiedHeartEllipsoidPassesSamplingOracle) {
  const auto heart = test::heart_obstacle(ScalarDistribution::uniform(-0.1, 0.1));
  const RiskContourMap map = build_contour_map({heart}, 0.3, {-1, -1, -1}, {1, 1, 1});
  const EllipsoidRegion e = ball({0.8, 0.0, 0.0}, 0.08);
  const CertResult result = certify_ellipsoid(map, e);
  ASSERT_EQ(result.verdict, CertResult::Verdict::Certified) << "margin " << result.margin;
  EXPECT_EQ(count_unsafe_samples(map, e, 10000), 0);
  EXPECT_LE(result.residual, 1e-6);
}
