#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "riskplan/kinematics.hpp"
#include "riskplan/risk_contour.hpp"
#include "riskplan/sim_env.hpp"

namespace riskplan {

// Gaussian control policy over the horizon: per-step mean and per-joint
// diagonal covariance, stored step-major ((H * control_dim) flat vectors).
struct PolicyParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd cov_diag;

  static PolicyParams make(int horizon, int control_dim, double init_cov);
  void validate() const;
};

struct MppiConfig {
  int n_samples = 1000;
  int horizon = 15;
  int iterations = 2;     // policy optimization rounds per control step
  double gamma = 0.98;    // per-step cost discount
  double alpha_mu = 0.7;  // mean step size
  double alpha_sigma = 0.3;
  double beta_temp = 1.0;  // softmax temperature on baselined totals
  int n_knots = 5;
  double cov_floor = 1e-4;
  double init_cov = 0.09;
  int halton_burn_in = 20;  // leading low-discrepancy points discarded

  void validate() const;
};

struct CostWeights {
  double alpha_p = 10.0;    // end-effector distance to goal
  double alpha_o = 0.1;     // approach-axis misalignment
  double alpha_c = 10.0;    // collision
  double alpha_lim = 10.0;  // limit violation
  double alpha_cert = 1e6;  // additive penalty on rejected control sequences
};

struct SceneContext {
  const RobotModel* robot = nullptr;
  const RiskContourMap* map = nullptr;       // cost shaping (stricter delta)
  const RiskContourMap* cert_map = nullptr;  // certification gate, null = use map
  GoalRegion goal;
  std::optional<Eigen::Vector3d> goal_axis;  // orientation cost off when absent
  CostWeights weights;
  int cost_points_per_link = 0;  // 0 = the robot's occupancy resolution
};

struct RolloutCosts {
  Eigen::VectorXd per_sample_total;  // discounted sums, length N
  Eigen::MatrixXd per_step;          // N x H undiscounted step costs
  Eigen::VectorXd weights;           // exp(-(total - min)/beta)
};

// Sampled control sequences, (H * control_dim) x N, clipped to the control
// limits. Sample 0 is the unperturbed mean; the rest perturb B-spline knots
// with normal-mapped Halton points offset by iteration_index.
Eigen::MatrixXd halton_spline_samples(const PolicyParams& p, const MppiConfig& cfg,
                                      const Limits& lim, int iteration_index);

// Discounted rollout costs plus softmax importance weights.
RolloutCosts evaluate_costs(const Eigen::MatrixXd& states, const Eigen::MatrixXd& controls,
                            const SceneContext& scene, const MppiConfig& cfg);

// Weights from already-filled per-step costs (exposed for custom cost tests
// and for re-weighting after penalty injection).
void finalize_costs(RolloutCosts& costs, double gamma, double beta_temp);

PolicyParams update_policy(const PolicyParams& p, const Eigen::MatrixXd& controls,
                           const RolloutCosts& costs, const MppiConfig& cfg);

PolicyParams shift_policy(const PolicyParams& p, const Eigen::VectorXd& default_u,
                          const Eigen::VectorXd& default_cov, const MppiConfig& cfg);

Eigen::VectorXd select_command(const PolicyParams& p, const Limits& lim);

// Clamped uniform cubic B-spline basis evaluated on an H-point parameter
// grid; rows sum to one.
Eigen::MatrixXd bspline_basis_matrix(int horizon, int n_knots);

}  // namespace riskplan
