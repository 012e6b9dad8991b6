#include "riskplan/kinematics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "riskplan/rng.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

TEST(ForwardKinematics, StraightPlanarArm) {
  const auto chain = test::planar2_chain();
  const auto fk = forward_kinematics(chain, Eigen::Vector2d(0.0, 0.0));
  EXPECT_NEAR((fk.ee - Eigen::Vector3d(2, 0, 0)).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, QuarterTurnAtBase) {
  const auto chain = test::planar2_chain();
  const auto fk = forward_kinematics(chain, Eigen::Vector2d(M_PI / 2, 0.0));
  EXPECT_NEAR((fk.ee - Eigen::Vector3d(0, 2, 0)).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, MatchesComplexChainSum) {
  const auto chain = test::planar2_chain();
  Rng rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const double q1 = rng.uniform(-M_PI, M_PI), q2 = rng.uniform(-M_PI, M_PI);
    const auto fk = forward_kinematics(chain, Eigen::Vector2d(q1, q2));
    const std::complex<double> expected =
        std::polar(1.0, q1) + std::polar(1.0, q1 + q2);
    EXPECT_NEAR(fk.ee.x(), expected.real(), 1e-12);
    EXPECT_NEAR(fk.ee.y(), expected.imag(), 1e-12);
    EXPECT_NEAR(fk.ee.z(), 0.0, 1e-12);
  }
  // The spec example: q = (pi/2, -pi/2) -> (1, 1, 0).
  const auto fk = forward_kinematics(chain, Eigen::Vector2d(M_PI / 2, -M_PI / 2));
  EXPECT_NEAR((fk.ee - Eigen::Vector3d(1, 1, 0)).norm(), 0.0, 1e-12);
}

TEST(ForwardKinematics, LipschitzInEachJoint) {
  const auto robot = test::planar3_robot();
  Rng rng(3);
  const double eps = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd q(3);
    for (int j = 0; j < 3; ++j) q(j) = rng.uniform(-2.5, 2.5);
    const Eigen::Vector3d base = forward_kinematics(robot.chain, q).ee;
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd qp = q;
      qp(j) += eps;
      const Eigen::Vector3d moved = forward_kinematics(robot.chain, qp).ee;
      // Rotating joint j moves the end effector by at most the distal length
      // from that joint, measured from the joint origin.
      const double reach = robot.chain.distal_length(j - 1 >= 0 ? j - 1 : 0) + 1e-9;
      EXPECT_LE((moved - base).norm(), eps * reach * 1.05 + 1e-9);
    }
  }
}

TEST(WithinLimits, MidRangeIsClean) {
  const auto robot = test::planar3_robot();
  JointState x = JointState::zero(3);
  const auto check = within_limits(x, Eigen::VectorXd::Zero(3), robot.limits);
  EXPECT_TRUE(check.ok);
  EXPECT_DOUBLE_EQ(check.violation, 0.0);
}

TEST(WithinLimits, ExceedanceIsMeasured) {
  const auto robot = test::planar3_robot();
  JointState x = JointState::zero(3);
  x.q(1) = robot.limits.q_max(1) + 0.1;
  const auto check = within_limits(x, Eigen::VectorXd::Zero(3), robot.limits);
  EXPECT_FALSE(check.ok);
  EXPECT_NEAR(check.violation, 0.1, 1e-12);
}

TEST(WithinLimits, ClosedBoundAtExactLimit) {
  const auto robot = test::planar3_robot();
  const JointState x = JointState::zero(3);
  const auto check = within_limits(x, robot.limits.u_max, robot.limits);
  EXPECT_TRUE(check.ok);
  EXPECT_DOUBLE_EQ(check.violation, 0.0);
}

TEST(LinkEllipsoids, StraightArmMidpoints) {
  const auto robot = test::planar3_robot();
  const auto ellipsoids =
      link_ellipsoids(robot.chain, robot.ellipsoids, Eigen::VectorXd::Zero(3));
  ASSERT_EQ(ellipsoids.size(), 3u);
  EXPECT_NEAR((ellipsoids[0].center - Eigen::Vector3d(0.25, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((ellipsoids[1].center - Eigen::Vector3d(0.7, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((ellipsoids[2].center - Eigen::Vector3d(1.05, 0, 0)).norm(), 0.0, 1e-12);
  for (const auto& e : ellipsoids) e.validate();
}

TEST(LinkEllipsoids, InflationScalesSemiAxes) {
  const auto robot = test::planar3_robot();
  LinkEllipsoidSpec doubled = robot.ellipsoids;
  doubled.inflation = 2.0;
  const auto base = link_ellipsoids(robot.chain, robot.ellipsoids, Eigen::VectorXd::Zero(3));
  const auto big = link_ellipsoids(robot.chain, doubled, Eigen::VectorXd::Zero(3));
  // Semi-axes are eigenvalue^-1/2 of the shape; doubling the inflation
  // divides the shape matrix by 4.
  EXPECT_NEAR((big[0].shape * 4.0 - base[0].shape).cwiseAbs().maxCoeff(), 0.0, 1e-10);
}

TEST(LinkEllipsoids, RotationIsASimilarityTransform) {
  const auto robot = test::planar3_robot();
  Eigen::VectorXd q(3);
  q << 0.9, -0.4, 0.7;
  const auto straight =
      link_ellipsoids(robot.chain, robot.ellipsoids, Eigen::VectorXd::Zero(3));
  const auto rotated = link_ellipsoids(robot.chain, robot.ellipsoids, q);
  for (int l = 0; l < 3; ++l) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es_a(straight[l].shape);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es_b(rotated[l].shape);
    EXPECT_NEAR((es_a.eigenvalues() - es_b.eigenvalues()).cwiseAbs().maxCoeff(), 0.0, 1e-9);
  }
}

TEST(LinkOccupancy, PointsLieOnTheCapsuleSurface) {
  const auto robot = test::planar3_robot();
  Eigen::VectorXd q(3);
  q << 0.4, 0.8, -1.1;
  const auto occupancy = link_occupancy(robot.chain, robot.ellipsoids, q);
  const auto fk = forward_kinematics(robot.chain, q);
  ASSERT_EQ(occupancy.size(), 3u);
  for (std::size_t l = 0; l < occupancy.size(); ++l) {
    ASSERT_EQ(occupancy[l].size(), 32u);
    const auto& link = robot.ellipsoids.links[l];
    const Eigen::Vector3d a = link.anchor_a == 3 ? fk.ee : fk.frames[link.anchor_a].translation();
    const Eigen::Vector3d b = link.anchor_b == 3 ? fk.ee : fk.frames[link.anchor_b].translation();
    const Eigen::Vector3d axis = (b - a).normalized();
    const double length = (b - a).norm();
    for (const auto& p : occupancy[l]) {
      const double t = std::clamp((p - a).dot(axis), 0.0, length);
      const double dist = (p - (a + t * axis)).norm();
      EXPECT_NEAR(dist, link.capsule_radius, 1e-9);
    }
  }
}

TEST(Calibration, ZeroErrorNeedsNoInflation) {
  const auto robot = test::planar3_robot();
  const std::vector<ScalarDistribution> tiny(3, ScalarDistribution::gaussian(0.0, 1e-9));
  const auto calibrated =
      calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits, tiny, 0.01, 1000, 5);
  // The base ellipsoid nearly covers the capsule; only the cap tips poke out.
  EXPECT_GE(calibrated.inflation, 1.0);
  EXPECT_LE(calibrated.inflation, 1.2);
}

TEST(Calibration, LooseDeltaNeedsLessInflationThanTight) {
  const auto robot = test::planar3_robot();
  const std::vector<ScalarDistribution> noise(3, ScalarDistribution::gaussian(0.0, 0.05));
  const auto loose =
      calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits, noise, 0.5, 2000, 5);
  const auto tight =
      calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits, noise, 0.001, 2000, 5);
  EXPECT_LE(loose.inflation, tight.inflation);
}

TEST(Calibration, FreshSeedContainmentMeetsTarget) {
  const auto robot = test::planar3_robot();
  const std::vector<ScalarDistribution> noise(3, ScalarDistribution::gaussian(0.0, 0.05));
  const double delta_ell = 0.001;
  const int n_mc = 4000;
  const auto calibrated = calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits,
                                               noise, delta_ell, n_mc, 5);
  const double freq =
      containment_frequency(robot.chain, calibrated, robot.limits, noise, 10000, 99);
  EXPECT_GE(freq, 1.0 - delta_ell - 3.0 * std::sqrt(delta_ell / n_mc));
}

TEST(Calibration, HopelessNoiseExceedsCap) {
  const auto robot = test::planar3_robot();
  LinkEllipsoidSpec capped = robot.ellipsoids;
  capped.inflation_cap = 1.5;
  const std::vector<ScalarDistribution> wild(3, ScalarDistribution::gaussian(0.0, 1.0));
  EXPECT_THROW(
      calibrate_ellipsoids(robot.chain, capped, robot.limits, wild, 0.001, 1000, 5),
      std::runtime_error);
}

TEST(Chain, ValidateCatchesBadAxis) {
  KinematicChain chain = test::planar2_chain();
  chain.joints[0].axis = Eigen::Vector3d(0, 0, 2);
  EXPECT_THROW(chain.validate(), std::invalid_argument);
}
