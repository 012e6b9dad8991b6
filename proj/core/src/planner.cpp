#include "riskplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>

namespace riskplan {

namespace {

// Vanishing per-cycle containment budgets cannot be calibrated by any
// realistic Monte-Carlo size.
constexpr double kMinDeltaEll = 1e-8;

struct CertOutcome {
  bool all_certified = true;
  CertResult worst;
  std::vector<CertSummary> log;
};

CertOutcome certify_prediction(const Eigen::VectorXd& q_pred, const RobotModel& robot,
                               const RiskContourMap& map, const PlannerConfig& cfg,
                               std::uint64_t seed, int step_index, int retry) {
  CertOutcome out;
  out.worst.verdict = CertResult::Verdict::Certified;
  out.worst.margin = cfg.sos.margin_cap;
  const auto ellipsoids = link_ellipsoids(robot.chain, robot.ellipsoids, q_pred);

  auto check_one = [&](const EllipsoidRegion& e) -> std::pair<CertResult, bool> {
    const auto counterexample =
        sample_falsify(map, e, cfg.falsify_samples, mix_seed(seed, step_index));
    if (counterexample) {
      CertResult r;
      r.verdict = CertResult::Verdict::NotCertified;
      r.margin = -1.0;
      r.detail = "falsified by sampling";
      return {r, true};
    }
    return {certify_ellipsoid(map, e, cfg.sos), false};
  };

  std::vector<std::pair<CertResult, bool>> results(ellipsoids.size());
  if (cfg.parallel_certification && ellipsoids.size() > 1) {
    std::vector<std::future<std::pair<CertResult, bool>>> futures;
    futures.reserve(ellipsoids.size());
    for (const auto& e : ellipsoids) {
      futures.push_back(std::async(std::launch::async, check_one, std::cref(e)));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < ellipsoids.size(); ++i) results[i] = check_one(ellipsoids[i]);
  }

  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [res, falsified] = results[i];
    CertSummary summary;
    summary.step = step_index;
    summary.retry = retry;
    summary.ellipsoid = ellipsoids[i].label;
    summary.contour = res.detail;
    summary.verdict = res.verdict;
    summary.margin = res.margin;
    summary.residual = res.residual;
    summary.falsified_by_sampling = falsified;
    out.log.push_back(summary);

    if (!res.certified()) {
      out.all_certified = false;
      out.worst = res;
    } else if (res.margin < out.worst.margin && out.all_certified) {
      out.worst.margin = res.margin;
      out.worst.residual = std::max(out.worst.residual, res.residual);
    }
  }
  return out;
}

}  // namespace

RiskBudget allocate_risk_budget(double delta, int z_bar) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("allocate_risk_budget: delta outside (0, 1)");
  }
  if (z_bar < 1) throw std::invalid_argument("allocate_risk_budget: z_bar must be >= 1");
  RiskBudget budget;
  budget.z_bar = z_bar;
  budget.delta_ell = std::min(0.001, delta / (2.0 * z_bar));
  budget.delta_o = delta - z_bar * budget.delta_ell;
  if (budget.delta_o <= 0.0 || budget.delta_ell < kMinDeltaEll) {
    throw std::invalid_argument("allocate_risk_budget: z_bar too large for delta");
  }
  return budget;
}

void PlannerConfig::validate() const {
  mppi.validate();
  if (max_retries < 0) throw std::invalid_argument("PlannerConfig: max_retries < 0");
  if (stall_limit < 1) throw std::invalid_argument("PlannerConfig: stall_limit < 1");
  if (falsify_samples < 1) throw std::invalid_argument("PlannerConfig: falsify_samples < 1");
}

PlanStepResult plan_step(const JointState& state, const PolicyParams& policy,
                         const KoopmanModel& model, const RobotModel& robot,
                         const SceneContext& scene, const PlannerConfig& cfg,
                         PlannerState& ps, int step_index) {
  const int n_q = robot.chain.n_q();
  Eigen::VectorXd x(2 * n_q);
  x << state.q, state.qdot;

  PolicyParams current = policy;
  auto optimize_round = [&](const std::vector<Eigen::VectorXd>& rejected) {
    Eigen::MatrixXd controls =
        halton_spline_samples(current, cfg.mppi, robot.limits, ps.halton_iteration);
    ++ps.halton_iteration;
    if (!rejected.empty()) {
      const int n = static_cast<int>(controls.cols());
      controls.conservativeResize(Eigen::NoChange, n + static_cast<int>(rejected.size()));
      for (std::size_t r = 0; r < rejected.size(); ++r) {
        controls.col(n + static_cast<int>(r)) = rejected[r];
      }
    }
    const Eigen::MatrixXd states = model.rollout_batch(
        x, controls, mix_seed(ps.seed, 7919 + ps.halton_iteration), true);
    RolloutCosts costs = evaluate_costs(states, controls, scene, cfg.mppi);
    if (!rejected.empty()) {
      // Binary collision feedback: rejected sequences re-enter at a penalty.
      const int n = static_cast<int>(controls.cols()) - static_cast<int>(rejected.size());
      for (std::size_t r = 0; r < rejected.size(); ++r) {
        costs.per_sample_total(n + static_cast<int>(r)) += scene.weights.alpha_cert;
      }
      const double baseline = costs.per_sample_total.minCoeff();
      costs.weights = ((-(costs.per_sample_total.array() - baseline)) / cfg.mppi.beta_temp)
                          .exp()
                          .matrix();
    }
    current = update_policy(current, controls, costs, cfg.mppi);
  };

  for (int k = 0; k < cfg.mppi.iterations; ++k) optimize_round({});

  PlanStepResult out;
  std::vector<Eigen::VectorXd> rejected;
  for (int retry = 0; retry <= cfg.max_retries; ++retry) {
    const Eigen::VectorXd u_star = select_command(current, robot.limits);
    const Eigen::VectorXd x_pred = model.predict_one(x, u_star);
    const Eigen::VectorXd q_pred = x_pred.head(n_q);

    const RiskContourMap& gate_map = scene.cert_map ? *scene.cert_map : *scene.map;
    CertOutcome outcome = certify_prediction(q_pred, robot, gate_map, cfg,
                                             mix_seed(ps.seed, 31 * step_index + retry),
                                             step_index, retry);
    out.cert_log.insert(out.cert_log.end(), outcome.log.begin(), outcome.log.end());

    if (outcome.all_certified) {
      out.u_star = u_star;
      out.policy = current;
      out.cert = outcome.worst;
      out.retries = retry;
      out.hold = false;
      return out;
    }
    if (outcome.worst.verdict == CertResult::Verdict::SolverFailure || retry == cfg.max_retries) {
      out.u_star = Eigen::VectorXd::Zero(n_q);
      out.policy = current;
      out.cert = outcome.worst;
      out.retries = retry;
      out.hold = true;
      return out;
    }
    rejected.push_back(current.mean);
    // Re-inflate exploration: the converged covariance would only resample
    // the rejected neighborhood.
    current.cov_diag = current.cov_diag.cwiseMax(cfg.mppi.init_cov);
    optimize_round(rejected);
  }
  // Unreachable: the loop always returns.
  throw std::logic_error("plan_step: fell through retry loop");
}

PlanResult run_episode(const Task& task, const KoopmanModel& model, const RobotModel& robot,
                       const PlannerConfig& cfg, const SimConfig& sim, std::uint64_t seed) {
  cfg.validate();
  sim.validate();
  const int n_q = robot.chain.n_q();

  PlanResult result;
  result.budget = allocate_risk_budget(task.delta, task.max_control_steps);

  const RiskContourMap user_map =
      build_contour_map(task.obstacles, task.delta, task.bounds_lo, task.bounds_hi);
  const RiskContourMap cert_map = build_contour_map(task.obstacles, result.budget.delta_o,
                                                    task.bounds_lo, task.bounds_hi);
  const RiskContourMap guidance_map = build_contour_map(
      task.obstacles, cfg.guidance_delta_fraction * result.budget.delta_o, task.bounds_lo,
      task.bounds_hi);

  // The task promises a collision-free start at the user risk level.
  for (const auto& link : link_occupancy(robot.chain, robot.ellipsoids, task.start.q)) {
    for (const auto& pt : link) {
      if (!map_safe(user_map, pt)) {
        throw std::invalid_argument("run_episode: start configuration is not map-safe");
      }
    }
  }

  SceneContext scene;
  scene.robot = &robot;
  scene.map = &guidance_map;
  scene.cert_map = &cert_map;
  scene.goal = task.goal;
  scene.goal_axis = task.goal_axis;
  scene.weights = cfg.weights;
  scene.cost_points_per_link = cfg.cost_points_per_link;

  SimConfig sim_seeded = sim;
  sim_seeded.seed = mix_seed(seed, 0x51f);

  PlannerState ps;
  ps.seed = mix_seed(seed, 0xa11);

  PolicyParams policy =
      PolicyParams::make(cfg.mppi.horizon, n_q, cfg.mppi.init_cov);
  const Eigen::VectorXd default_u = Eigen::VectorXd::Zero(n_q);
  const Eigen::VectorXd default_cov = Eigen::VectorXd::Constant(n_q, cfg.mppi.init_cov);

  JointState x = task.start;
  Eigen::Vector3d ee_prev = forward_kinematics(robot.chain, x.q).ee;
  int consecutive_stalls = 0;
  bool stalled_out = false;

  int step = 0;
  for (; step < task.max_control_steps; ++step) {
    const Eigen::Vector3d ee = forward_kinematics(robot.chain, x.q).ee;
    if (at_goal(ee, task.goal)) break;
    if ((step + 1) * sim.dt > task.time_budget) break;

    policy = shift_policy(policy, default_u, default_cov, cfg.mppi);
    PlanStepResult sr = plan_step(x, policy, model, robot, scene, cfg, ps, step);
    policy = sr.policy;

    StepRecord record;
    record.step = step;
    record.q = x.q;
    record.qdot = x.qdot;
    record.u = sr.u_star;
    record.goal_distance = (ee - task.goal.center).norm();
    record.collision_cost_value =
        collision_cost(x.q, robot.chain, robot.ellipsoids, cert_map, cfg.weights.alpha_c);
    record.certified = sr.cert.certified();
    record.hold = sr.hold;
    record.retries = sr.retries;
    result.trajectory.push_back(std::move(record));
    result.cert_log.insert(result.cert_log.end(), sr.cert_log.begin(), sr.cert_log.end());

    if (sr.hold) {
      ++result.stall_count;
      if (++consecutive_stalls >= cfg.stall_limit) {
        stalled_out = true;
        ++step;
        break;
      }
    } else {
      consecutive_stalls = 0;
    }

    x = true_step(x, sr.u_star, sim_seeded, robot.limits, step);
    const Eigen::Vector3d ee_next = forward_kinematics(robot.chain, x.q).ee;
    result.ee_path_length += (ee_next - ee_prev).norm();
    ee_prev = ee_next;
  }

  result.steps = static_cast<int>(result.trajectory.size());
  result.ttg = result.steps * sim.dt;
  result.success =
      !stalled_out && at_goal(forward_kinematics(robot.chain, x.q).ee, task.goal);
  result.guarantee_void = result.steps > result.budget.z_bar;
  return result;
}

BenchMetrics compute_metrics(const RobotModel& robot, const Task& task,
                             const std::vector<PlanResult>& results, int n_realizations,
                             std::uint64_t seed) {
  if (results.empty()) throw std::invalid_argument("compute_metrics: no results");
  BenchMetrics m;
  m.episodes = static_cast<int>(results.size());
  double ttg_s = 0.0, len_s = 0.0, ttg_a = 0.0, len_a = 0.0;
  for (const auto& r : results) {
    if (r.success) {
      ++m.successes;
      ttg_s += r.ttg;
      len_s += r.ee_path_length;
    }
    ttg_a += r.ttg;
    len_a += r.ee_path_length;
  }
  m.success_rate = static_cast<double>(m.successes) / m.episodes;
  m.mean_ttg_success = m.successes > 0 ? ttg_s / m.successes
                                       : std::numeric_limits<double>::quiet_NaN();
  m.mean_length_success = m.successes > 0 ? len_s / m.successes
                                          : std::numeric_limits<double>::quiet_NaN();
  m.mean_ttg_all = ttg_a / m.episodes;
  m.mean_length_all = len_a / m.episodes;

  if (n_realizations > 0 && !task.obstacles.empty()) {
    long collisions = 0;
    long pairs = 0;
    for (std::size_t t = 0; t < results.size(); ++t) {
      // Executed configurations, including the implicit final state.
      std::vector<Eigen::VectorXd> configs;
      for (const auto& rec : results[t].trajectory) configs.push_back(rec.q);
      if (configs.empty()) configs.push_back(task.start.q);

      std::vector<std::vector<Eigen::Vector3d>> flat_points;
      for (const auto& q : configs) {
        auto occ = link_occupancy(robot.chain, robot.ellipsoids, q);
        std::vector<Eigen::Vector3d> pts;
        for (auto& link : occ) pts.insert(pts.end(), link.begin(), link.end());
        flat_points.push_back(std::move(pts));
      }

      Rng rng(mix_seed(seed, 0xc0111de + t));
      for (int r = 0; r < n_realizations; ++r) {
        bool collided = false;
        for (const auto& ob : task.obstacles) {
          // One obstacle realization applies to the whole trajectory.
          Polynomial frozen = ob.omega_index >= 0
                                  ? ob.poly.substitute(ob.omega_index, ob.omega.sample(rng))
                                  : ob.poly;
          std::vector<double> values(frozen.num_variables(), 0.0);
          for (const auto& pts : flat_points) {
            for (const auto& p : pts) {
              values[0] = p.x();
              values[1] = p.y();
              values[2] = p.z();
              if (frozen.eval(values) <= 0.0) {
                collided = true;
                break;
              }
            }
            if (collided) break;
          }
          if (collided) break;
        }
        if (collided) ++collisions;
        ++pairs;
      }
    }
    m.empirical_collision_rate = static_cast<double>(collisions) / pairs;
    m.collision_rate_stderr = std::sqrt(
        std::max(m.empirical_collision_rate * (1.0 - m.empirical_collision_rate), 1e-12) /
        pairs);
  }
  return m;
}

NominalTrajectory collect_nominal_trajectory(const RobotModel& robot, const Task& task,
                                             const PlannerConfig& cfg, double dt,
                                             std::uint64_t seed) {
  Task clean = task;
  clean.obstacles.clear();

  SimConfig sim;
  sim.dt = dt;
  sim.noise = ProcessNoise::none();
  sim.max_steps = task.max_control_steps;

  const KoopmanModel baseline = KoopmanModel::exact_integrator(robot.chain.n_q(), dt);
  PlanResult plan = run_episode(clean, baseline, robot, cfg, sim, seed);
  if (!plan.success) {
    throw std::runtime_error("collect_nominal_trajectory: baseline plan failed to reach goal");
  }
  NominalTrajectory out;
  for (const auto& rec : plan.trajectory) {
    JointState x;
    x.q = rec.q;
    x.qdot = rec.qdot;
    out.states.push_back(std::move(x));
    out.controls.push_back(rec.u);
  }
  return out;
}

TrajectoryDataset generate_dataset(const RobotModel& robot, const NominalTrajectory& nominal,
                                   const DataGenConfig& cfg, double dt, std::uint64_t seed) {
  if (nominal.states.empty()) throw std::invalid_argument("generate_dataset: empty nominal");
  const int n_q = robot.chain.n_q();
  const int sd = 2 * n_q;
  const int h = cfg.horizon;
  const int n_traj = static_cast<int>(nominal.states.size()) * cfg.samples_per_waypoint;

  TrajectoryDataset data;
  data.horizon = h;
  data.state_dim = sd;
  data.control_dim = n_q;
  data.states.resize((h + 1) * sd, n_traj);
  data.controls.resize(h * n_q, n_traj);

  PolicyParams action_policy = PolicyParams::make(h, n_q, cfg.action_cov);
  MppiConfig sampler_cfg;
  sampler_cfg.horizon = h;
  sampler_cfg.n_samples = cfg.samples_per_waypoint + 1;  // sample 0 is the zero mean

  int col = 0;
  for (std::size_t w = 0; w < nominal.states.size(); ++w) {
    const Eigen::MatrixXd actions = halton_spline_samples(
        action_policy, sampler_cfg, robot.limits, static_cast<int>(w));
    Rng rng(mix_seed(seed, 0xda7a + w));
    for (int s = 0; s < cfg.samples_per_waypoint; ++s) {
      JointState x;
      x.q = nominal.states[w].q;
      x.qdot = nominal.states[w].qdot;
      for (int j = 0; j < n_q; ++j) {
        x.q(j) += cfg.position_offset.sample(rng);
        x.qdot(j) += cfg.velocity_offset.sample(rng);
      }
      const Eigen::VectorXd controls = actions.col(s + 1);

      SimConfig sim;
      sim.dt = dt;
      sim.noise = cfg.noise;
      sim.seed = mix_seed(seed, 1000003ULL * w + s);
      sim.max_steps = h;

      data.states.block(0, col, n_q, 1) = x.q;
      data.states.block(n_q, col, n_q, 1) = x.qdot;
      for (int k = 0; k < h; ++k) {
        const Eigen::VectorXd u = controls.segment(k * n_q, n_q);
        x = true_step(x, u, sim, robot.limits, k);
        data.states.block((k + 1) * sd, col, n_q, 1) = x.q;
        data.states.block((k + 1) * sd + n_q, col, n_q, 1) = x.qdot;
        data.controls.block(k * n_q, col, n_q, 1) = u;
      }
      ++col;
    }
  }
  return data;
}

}  // namespace riskplan
