#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "riskplan/distribution.hpp"
#include "riskplan/kinematics.hpp"
#include "riskplan/polynomial.hpp"
#include "riskplan/risk_contour.hpp"

namespace riskplan::test {

inline const std::vector<std::string> kObstacleVars = {"x", "y", "z", "omega"};

// Sphere of uncertain radius centered at c: |p - c|^2 - omega^2 <= 0.
inline UncertainObstacle sphere_obstacle(const ScalarDistribution& radius,
                                         const Eigen::Vector3d& c = Eigen::Vector3d::Zero(),
                                         const std::string& name = "sphere") {
  Polynomial p(kObstacleVars);
  p.add_term({2, 0, 0, 0}, 1.0);
  p.add_term({0, 2, 0, 0}, 1.0);
  p.add_term({0, 0, 2, 0}, 1.0);
  p.add_term({1, 0, 0, 0}, -2.0 * c.x());
  p.add_term({0, 1, 0, 0}, -2.0 * c.y());
  p.add_term({0, 0, 1, 0}, -2.0 * c.z());
  p.add_term({0, 0, 0, 0}, c.squaredNorm());
  p.add_term({0, 0, 0, 2}, -1.0);
  return UncertainObstacle::make(p, radius, name);
}

// Heart-shaped sextic surface with an additive random level set:
// (25x^2 + 225/4 y^2 + 25z^2 - 1)^3 - 3125 x^2 z^3 - 5625/16 y^2 z^3 - omega.
inline UncertainObstacle heart_obstacle(const ScalarDistribution& omega,
                                        const std::string& name = "heart") {
  Polynomial base(kObstacleVars);
  base.add_term({2, 0, 0, 0}, 25.0);
  base.add_term({0, 2, 0, 0}, 225.0 / 4.0);
  base.add_term({0, 0, 2, 0}, 25.0);
  base.add_term({0, 0, 0, 0}, -1.0);
  Polynomial heart = base * base * base;
  heart.add_term({2, 0, 3, 0}, -3125.0);
  heart.add_term({0, 2, 3, 0}, -5625.0 / 16.0);
  heart.add_term({0, 0, 0, 1}, -1.0);
  return UncertainObstacle::make(heart, omega, name);
}

// Planar 3-link arm in the x-y plane (links 0.5 / 0.4 / 0.3 m).
inline RobotModel planar3_robot() {
  RobotModel robot;
  robot.name = "planar3";
  Joint j0, j1, j2;
  j0.axis = Eigen::Vector3d::UnitZ();
  j1.parent_transform.translation() = Eigen::Vector3d(0.5, 0.0, 0.0);
  j1.axis = Eigen::Vector3d::UnitZ();
  j2.parent_transform.translation() = Eigen::Vector3d(0.4, 0.0, 0.0);
  j2.axis = Eigen::Vector3d::UnitZ();
  robot.chain.joints = {j0, j1, j2};
  robot.chain.ee_offset.translation() = Eigen::Vector3d(0.3, 0.0, 0.0);

  robot.limits.q_min = Eigen::VectorXd::Constant(3, -3.0);
  robot.limits.q_max = Eigen::VectorXd::Constant(3, 3.0);
  robot.limits.v_max = Eigen::VectorXd::Constant(3, 1.5);
  robot.limits.u_max = Eigen::VectorXd::Constant(3, 1.5);

  robot.ellipsoids.links = {{0, 1, 0.04}, {1, 2, 0.04}, {2, 3, 0.04}};
  robot.ellipsoids.margin = 0.02;
  robot.ellipsoids.points_per_link = 32;
  return robot;
}

// Planar 2-link with unit links, for closed-form kinematics checks.
inline KinematicChain planar2_chain() {
  KinematicChain chain;
  Joint j0, j1;
  j0.axis = Eigen::Vector3d::UnitZ();
  j1.parent_transform.translation() = Eigen::Vector3d(1.0, 0.0, 0.0);
  j1.axis = Eigen::Vector3d::UnitZ();
  chain.joints = {j0, j1};
  chain.ee_offset.translation() = Eigen::Vector3d(1.0, 0.0, 0.0);
  return chain;
}

}  // namespace riskplan::test
