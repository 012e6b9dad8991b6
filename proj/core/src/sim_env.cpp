#include "riskplan/sim_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "riskplan/rng.hpp"

namespace riskplan {

ProcessNoise ProcessNoise::iid(const ScalarDistribution& d, int state_dim) {
  ProcessNoise n;
  n.components.assign(state_dim, d);
  return n;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (max_steps < 1) throw std::invalid_argument("SimConfig: max_steps must be >= 1");
}

JointState true_step(const JointState& x, const Eigen::VectorXd& u, const SimConfig& cfg,
                     const Limits& lim, int step_index) {
  const int n_q = static_cast<int>(x.q.size());
  if (u.size() != n_q) throw std::invalid_argument("true_step: control size mismatch");

  JointState next;
  next.qdot = u.cwiseMin(lim.u_max).cwiseMax(-lim.u_max);
  next.q = (x.q + cfg.dt * next.qdot).cwiseMin(lim.q_max).cwiseMax(lim.q_min);

  if (!cfg.noise.components.empty()) {
    if (static_cast<int>(cfg.noise.components.size()) != 2 * n_q) {
      throw std::invalid_argument("true_step: noise must cover the full state");
    }
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step_index)));
    for (int i = 0; i < n_q; ++i) next.q(i) += cfg.noise.components[i].sample(rng);
    for (int i = 0; i < n_q; ++i) next.qdot(i) += cfg.noise.components[n_q + i].sample(rng);
  }
  return next;
}

double collision_cost(const Eigen::VectorXd& q, const KinematicChain& chain,
                      const LinkEllipsoidSpec& spec, const RiskContourMap& map,
                      double alpha_c) {
  if (map.contours.empty()) return 0.0;
  return collision_cost(forward_kinematics(chain, q), chain, spec, map, alpha_c);
}

double collision_cost(const FkResult& fk, const KinematicChain& chain,
                      const LinkEllipsoidSpec& spec, const RiskContourMap& map,
                      double alpha_c) {
  if (map.contours.empty()) return 0.0;
  const double delta = map.contours.front().delta;
  double cost = 0.0;
  for_each_surface_point(chain, spec, fk, [&](std::size_t, const Eigen::Vector3d& pt) {
    const double risk = map_risk(map, pt);
    if (risk > delta) cost += alpha_c * risk;
    for (const auto& contour : map.contours) {
      const double v2 = contour.eval_p2(pt);
      if (v2 < 0.0) cost += alpha_c * (-v2);
    }
  });
  return cost;
}

bool at_goal(const Eigen::Vector3d& ee, const GoalRegion& goal) {
  return (ee - goal.center).norm() <= goal.radius;
}

}  // namespace riskplan
