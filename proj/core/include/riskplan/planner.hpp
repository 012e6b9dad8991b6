#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskplan/koopman_model.hpp"
#include "riskplan/mppi.hpp"
#include "riskplan/sim_env.hpp"
#include "riskplan/sos_certifier.hpp"

namespace riskplan {

struct Task {
  std::string name;
  JointState start;
  GoalRegion goal;
  std::optional<Eigen::Vector3d> goal_axis;
  std::vector<UncertainObstacle> obstacles;
  double delta = 0.3;
  double time_budget = 1e9;  // simulated seconds
  int max_control_steps = 200;
  Eigen::Vector3d bounds_lo = Eigen::Vector3d::Constant(-2.0);
  Eigen::Vector3d bounds_hi = Eigen::Vector3d::Constant(2.0);
};

// Split of the episode risk tolerance between the obstacle side (certified
// per step) and the ellipsoid-containment side (calibrated, paid once per
// planning cycle up to the z_bar cap).
struct RiskBudget {
  double delta_o = 0.0;
  double delta_ell = 0.0;
  int z_bar = 1;
};

// delta_ell = min(1e-3, delta / (2 z_bar)), delta_o = delta - z_bar*delta_ell.
// Throws when the split leaves no usable obstacle budget (delta_o <= 0 or a
// vanishing delta_ell that no calibration could target).
RiskBudget allocate_risk_budget(double delta, int z_bar);

struct CertSummary {
  int step = 0;
  int retry = 0;
  std::string ellipsoid;
  std::string contour;
  CertResult::Verdict verdict = CertResult::Verdict::NotCertified;
  double margin = 0.0;
  double residual = 0.0;
  bool falsified_by_sampling = false;
};

struct StepRecord {
  int step = 0;
  Eigen::VectorXd q, qdot, u;
  double goal_distance = 0.0;
  double collision_cost_value = 0.0;
  bool certified = false;
  bool hold = false;
  int retries = 0;
};

struct PlanResult {
  bool success = false;
  int steps = 0;
  double ttg = 0.0;
  double ee_path_length = 0.0;
  int stall_count = 0;
  bool guarantee_void = false;
  RiskBudget budget;
  std::vector<StepRecord> trajectory;
  std::vector<CertSummary> cert_log;
};

struct PlannerConfig {
  MppiConfig mppi;
  CostWeights weights;
  SosOptions sos;
  int max_retries = 10;
  int stall_limit = 20;     // consecutive holds before declaring failure
  int falsify_samples = 64;
  bool parallel_certification = true;
  // The cost-shaping map is built at guidance_delta_fraction * delta_o so the
  // optimizer backs off before the (conservative, ellipsoid-level) gate fires.
  double guidance_delta_fraction = 0.5;
  int cost_points_per_link = 0;  // guidance resolution, 0 = occupancy resolution

  void validate() const;
};

// Mutable per-episode sampler state: keeps low-discrepancy draws fresh across
// optimization rounds.
struct PlannerState {
  int halton_iteration = 0;
  std::uint64_t seed = 0;
};

struct PlanStepResult {
  Eigen::VectorXd u_star;
  PolicyParams policy;
  CertResult cert;
  int retries = 0;
  bool hold = false;
  std::vector<CertSummary> cert_log;
};

// One receding-horizon cycle: policy optimization rounds, command selection,
// deterministic one-step prediction, sampling pre-filter plus full
// certification of every link ellipsoid, and bounded re-optimization with the
// rejected sequence re-injected at penalty cost. Exhaustion returns the hold
// command with the last verdict.
PlanStepResult plan_step(const JointState& state, const PolicyParams& policy,
                         const KoopmanModel& model, const RobotModel& robot,
                         const SceneContext& scene, const PlannerConfig& cfg,
                         PlannerState& ps, int step_index);

// Full episode against the ground-truth environment. The certification map is
// rebuilt at the budget's delta_o; ellipsoid calibration for delta_ell is the
// caller's responsibility (robot.ellipsoids.inflation).
PlanResult run_episode(const Task& task, const KoopmanModel& model, const RobotModel& robot,
                       const PlannerConfig& cfg, const SimConfig& sim, std::uint64_t seed);

struct BenchMetrics {
  double success_rate = 0.0;
  double mean_ttg_success = 0.0;
  double mean_length_success = 0.0;
  double mean_ttg_all = 0.0;
  double mean_length_all = 0.0;
  double empirical_collision_rate = 0.0;
  double collision_rate_stderr = 0.0;
  int episodes = 0;
  int successes = 0;
};

// Aggregates plus a post-hoc Monte-Carlo estimate of the true collision
// probability of the executed trajectories over obstacle realizations.
BenchMetrics compute_metrics(const RobotModel& robot, const Task& task,
                             const std::vector<PlanResult>& results, int n_realizations,
                             std::uint64_t seed);

struct DataGenConfig {
  int samples_per_waypoint = 50;
  int horizon = 15;
  ScalarDistribution position_offset = ScalarDistribution::uniform(-0.2, 0.2);
  ScalarDistribution velocity_offset = ScalarDistribution::uniform(-0.05, 0.05);
  ProcessNoise noise;
  double action_cov = 0.09;
};

struct NominalTrajectory {
  std::vector<JointState> states;
  std::vector<Eigen::VectorXd> controls;
};

// Obstacle-free noiseless plan to the goal with the analytic integrator lift
// as the rollout model. Throws if the goal is not reached.
NominalTrajectory collect_nominal_trajectory(const RobotModel& robot, const Task& task,
                                             const PlannerConfig& cfg, double dt,
                                             std::uint64_t seed);

// Perturbed starts around each waypoint, low-discrepancy spline actions, and
// noisy ground-truth propagation for the configured horizon.
TrajectoryDataset generate_dataset(const RobotModel& robot, const NominalTrajectory& nominal,
                                   const DataGenConfig& cfg, double dt, std::uint64_t seed);

}  // namespace riskplan
