#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "riskplan/distribution.hpp"
#include "riskplan/kinematics.hpp"
#include "riskplan/risk_contour.hpp"

namespace riskplan {

// Per-state-component process noise added after the deterministic step.
struct ProcessNoise {
  std::vector<ScalarDistribution> components;  // size 2 n_q, or empty for none

  static ProcessNoise none() { return {}; }
  static ProcessNoise iid(const ScalarDistribution& d, int state_dim);
};

struct SimConfig {
  double dt = 0.1;
  ProcessNoise noise;
  std::uint64_t seed = 0;
  int max_steps = 200;

  void validate() const;
};

struct GoalRegion {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.1;
};

// Ground-truth step: velocity-command integrator clipped to limits, then one
// seeded noise draw on the full state. Reproducible from (seed, step_index).
JointState true_step(const JointState& x, const Eigen::VectorXd& u, const SimConfig& cfg,
                     const Limits& lim, int step_index);

// Coarse collision cost at a configuration: risk-contour violation plus
// polynomial penetration depth over the link surface samples. Zero iff every
// sampled point is map-safe.
double collision_cost(const Eigen::VectorXd& q, const KinematicChain& chain,
                      const LinkEllipsoidSpec& spec, const RiskContourMap& map,
                      double alpha_c);
// Same cost reusing an existing forward-kinematics result (hot path).
double collision_cost(const FkResult& fk, const KinematicChain& chain,
                      const LinkEllipsoidSpec& spec, const RiskContourMap& map,
                      double alpha_c);

bool at_goal(const Eigen::Vector3d& ee, const GoalRegion& goal);

}  // namespace riskplan
