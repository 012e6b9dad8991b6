// Command-line front end: dataset generation, model training, benchmarking,
// single-episode planning, standalone certification, and contour export.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "riskplan/planner.hpp"
#include "riskplan/serialization.hpp"

namespace fs = std::filesystem;
using namespace riskplan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInvariant = 3;

Eigen::VectorXd parse_csv_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  Eigen::VectorXd out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out(i) = values[i];
  return out;
}

ScalarDistribution parse_noise_arg(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("noise: expected kind:p1,p2[,..]");
  const std::string kind = text.substr(0, colon);
  const Eigen::VectorXd p = parse_csv_vector(text.substr(colon + 1));
  if (kind == "uniform") return ScalarDistribution::uniform(p(0), p(1));
  if (kind == "gaussian") return ScalarDistribution::gaussian(p(0), p(1));
  if (kind == "beta") return ScalarDistribution::beta(p(0), p(1), p(2), p(3));
  throw std::invalid_argument("noise: unknown kind " + kind);
}

io::json step_record_to_json(const StepRecord& rec, double dt) {
  io::json j;
  j["t"] = rec.step * dt;
  j["step"] = rec.step;
  j["q"] = std::vector<double>(rec.q.data(), rec.q.data() + rec.q.size());
  j["qdot"] = std::vector<double>(rec.qdot.data(), rec.qdot.data() + rec.qdot.size());
  j["u"] = std::vector<double>(rec.u.data(), rec.u.data() + rec.u.size());
  j["goal_distance"] = rec.goal_distance;
  j["collision_cost"] = rec.collision_cost_value;
  j["certified"] = rec.certified;
  j["hold"] = rec.hold;
  j["retries"] = rec.retries;
  return j;
}

void write_episode_log(const fs::path& path, const Task& task, const PlanResult& result,
                       double dt, std::uint64_t seed) {
  std::ofstream out(path);
  io::json header;
  header["task"] = task.name;
  header["seed"] = seed;
  header["delta"] = task.delta;
  header["delta_o"] = result.budget.delta_o;
  header["delta_ell"] = result.budget.delta_ell;
  header["success"] = result.success;
  header["steps"] = result.steps;
  header["ttg"] = result.ttg;
  header["ee_path_length"] = result.ee_path_length;
  header["stall_count"] = result.stall_count;
  header["guarantee_void"] = result.guarantee_void;
  out << header.dump() << "\n";
  for (const auto& rec : result.trajectory) out << step_record_to_json(rec, dt).dump() << "\n";
  for (const auto& cert : result.cert_log) {
    io::json j;
    j["cert_step"] = cert.step;
    j["retry"] = cert.retry;
    j["ellipsoid"] = cert.ellipsoid;
    j["contour"] = cert.contour;
    j["verdict"] = cert.verdict == CertResult::Verdict::Certified       ? "certified"
                   : cert.verdict == CertResult::Verdict::NotCertified ? "not_certified"
                                                                        : "solver_failure";
    j["margin"] = cert.margin;
    j["residual"] = cert.residual;
    j["falsified_by_sampling"] = cert.falsified_by_sampling;
    out << j.dump() << "\n";
  }
}

struct CommonArgs {
  std::string robot_path;
  std::string scene_path;
  std::string model_path;
  std::string out_path;
  std::uint64_t seed = 0;
  double delta = 0.3;
};

int cmd_gen_data(const CommonArgs& common, const std::string& goal_arg,
                 const std::string& start_arg, int samples, int horizon, int max_steps,
                 const std::string& noise_arg, double dt) {
  const RobotModel robot = io::load_robot(common.robot_path);
  Task task;
  task.name = "nominal";
  task.start.q = start_arg.empty() ? Eigen::VectorXd::Zero(robot.chain.n_q())
                                   : parse_csv_vector(start_arg);
  task.start.qdot = Eigen::VectorXd::Zero(robot.chain.n_q());
  const Eigen::VectorXd goal = parse_csv_vector(goal_arg);
  task.goal.center = Eigen::Vector3d(goal(0), goal(1), goal(2));
  task.goal.radius = 0.1;
  task.max_control_steps = max_steps;

  PlannerConfig cfg;
  cfg.mppi.n_samples = 128;
  cfg.mppi.horizon = horizon;

  std::printf("collecting nominal trajectory (obstacle-free, noise-free)...\n");
  const NominalTrajectory nominal =
      collect_nominal_trajectory(robot, task, cfg, dt, common.seed);
  std::printf("nominal trajectory: %zu waypoints\n", nominal.states.size());

  DataGenConfig gen;
  gen.samples_per_waypoint = samples;
  gen.horizon = horizon;
  gen.noise = ProcessNoise::iid(parse_noise_arg(noise_arg), 2 * robot.chain.n_q());
  const TrajectoryDataset data = generate_dataset(robot, nominal, gen, dt, common.seed);
  io::save_dataset(common.out_path, data);
  std::printf("dataset: %d trajectories of horizon %d -> %s\n", data.size(), data.horizon,
              common.out_path.c_str());
  return kExitOk;
}

int cmd_train(const CommonArgs& common, const std::string& dataset_path, int epochs,
              int batch_size, int lift_dim, const std::string& curve_path,
              bool run_gradient_check) {
  const TrajectoryDataset data = io::load_dataset(dataset_path);
  KoopmanConfig cfg = KoopmanConfig::defaults(data.state_dim, data.control_dim);
  cfg.horizon = data.horizon;
  if (epochs >= 0) cfg.epochs = epochs;
  if (batch_size > 0) cfg.batch_size = batch_size;
  if (lift_dim > 0) {
    cfg.lift_dim = lift_dim;
    cfg.entropy_target = cfg.lift_dim * (1.4189385332046727 + 0.5 * std::log(0.01));
  }

  if (run_gradient_check) {
    const Normalization norm = data.compute_normalization();
    const KoopmanModel probe = KoopmanModel::init(cfg, norm, mix_seed(common.seed, 1));
    std::vector<int> idx;
    for (int i = 0; i < std::min(8, data.size()); ++i) idx.push_back(i);
    const double err = gradient_check(probe, data, idx, common.seed, 1e-5, 50);
    std::printf("gradient check: max relative error %.3e\n", err);
    if (err > 1e-4) return kExitInvariant;
  }

  TrainReport report;
  KoopmanModel model = [&] {
    try {
      return train_koopman(cfg, data, common.seed, &report);
    } catch (const TrainingDiverged& diverged) {
      std::fprintf(stderr, "training diverged; saving the last finite checkpoint\n");
      io::save_model(common.out_path, diverged.last_checkpoint);
      throw;
    }
  }();
  io::save_model(common.out_path, model);
  std::printf("trained %d epochs, best held-out H-step mse %.6e (epoch %d) -> %s\n",
              cfg.epochs, report.best_holdout, report.best_epoch, common.out_path.c_str());

  if (!curve_path.empty()) {
    io::CsvWriter csv(curve_path);
    csv.row({"epoch", "train_loss", "holdout_mse"});
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
      csv.row({std::to_string(e + 1), io::format_double(report.train_loss[e]),
               io::format_double(report.holdout_mse[e + 1])});
    }
  }
  return kExitOk;
}

// Ellipsoid calibration per distinct containment budget, shared across tasks.
RobotModel calibrated_robot(const RobotModel& robot, const io::BenchSpec& bench,
                            double delta_ell, std::uint64_t seed) {
  RobotModel out = robot;
  if (!bench.has_noise) return out;
  const std::vector<ScalarDistribution> pred_error(robot.chain.n_q(), bench.noise);
  out.ellipsoids = calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits,
                                        pred_error, delta_ell, bench.calibration_draws, seed);
  return out;
}

int cmd_bench(const CommonArgs& common, const std::string& spec_path) {
  const io::BenchSpec bench = io::load_bench_spec(spec_path);
  const RobotModel robot = io::load_robot(bench.robot_path);
  const io::Scene scene = io::load_scene(bench.scene_path);
  const KoopmanModel model = io::load_model(common.model_path);

  PlannerConfig cfg;
  if (!bench.overrides.is_null()) io::apply_overrides(bench.overrides, cfg);
  cfg.mppi.horizon = model.config.horizon;

  SimConfig sim;
  sim.dt = bench.dt;
  if (bench.has_noise) sim.noise = ProcessNoise::iid(bench.noise, 2 * robot.chain.n_q());

  fs::create_directories(common.out_path);
  io::CsvWriter csv(fs::path(common.out_path) / "results.csv");
  csv.row({"task", "episodes", "successes", "success_rate", "mean_ttg_success",
           "mean_length_success", "mean_ttg_all", "mean_length_all",
           "empirical_collision_rate", "collision_rate_stderr", "stalls", "guarantee_void"});

  std::map<long, RobotModel> calibrated;  // keyed by round(delta_ell * 1e12)
  bool invariant_violated = false;

  for (const auto& task_template : bench.tasks) {
    Task task = task_template;
    task.obstacles = scene.obstacles;
    task.bounds_lo = scene.bounds_lo;
    task.bounds_hi = scene.bounds_hi;

    const RiskBudget budget = allocate_risk_budget(task.delta, task.max_control_steps);
    const long key = static_cast<long>(budget.delta_ell * 1e12);
    if (!calibrated.count(key)) {
      calibrated.emplace(key,
                         calibrated_robot(robot, bench, budget.delta_ell, mix_seed(17, key)));
    }
    const RobotModel& arm = calibrated.at(key);

    std::vector<PlanResult> results;
    int stalls = 0, voids = 0;
    for (const std::uint64_t file_seed : bench.seeds) {
      const std::uint64_t seed = mix_seed(common.seed, file_seed);
      try {
        PlanResult result = run_episode(task, model, arm, cfg, sim, seed);
        // Safety gate: a non-hold step must carry a certificate.
        for (const auto& rec : result.trajectory) {
          if (!rec.hold && !rec.certified) invariant_violated = true;
        }
        if (budget.delta_o + budget.z_bar * budget.delta_ell > task.delta + 1e-12) {
          invariant_violated = true;
        }
        stalls += result.stall_count;
        voids += result.guarantee_void ? 1 : 0;
        write_episode_log(fs::path(common.out_path) /
                              (task.name + "_seed" + std::to_string(file_seed) + ".jsonl"),
                          task, result, sim.dt, file_seed);
        results.push_back(std::move(result));
      } catch (const std::exception& err) {
        std::fprintf(stderr, "episode %s/seed %llu failed: %s\n", task.name.c_str(),
                     static_cast<unsigned long long>(file_seed), err.what());
        PlanResult failed;
        failed.success = false;
        failed.budget = budget;
        results.push_back(std::move(failed));
      }
    }

    const BenchMetrics metrics = compute_metrics(arm, task, results,
                                                 bench.collision_realizations, common.seed);
    csv.row({task.name, std::to_string(metrics.episodes), std::to_string(metrics.successes),
             io::format_double(metrics.success_rate),
             io::format_double(metrics.mean_ttg_success),
             io::format_double(metrics.mean_length_success),
             io::format_double(metrics.mean_ttg_all),
             io::format_double(metrics.mean_length_all),
             io::format_double(metrics.empirical_collision_rate),
             io::format_double(metrics.collision_rate_stderr), std::to_string(stalls),
             std::to_string(voids)});
    std::printf("%s: success %d/%d, ttg %.2f s, length %.3f m, collision rate %.4f\n",
                task.name.c_str(), metrics.successes, metrics.episodes,
                metrics.mean_ttg_success, metrics.mean_length_success,
                metrics.empirical_collision_rate);
  }
  return invariant_violated ? kExitInvariant : kExitOk;
}

int cmd_plan(const CommonArgs& common, const std::string& goal_arg,
             const std::string& start_arg, const std::string& noise_arg, int max_steps,
             double dt) {
  const RobotModel robot = io::load_robot(common.robot_path);
  const io::Scene scene = io::load_scene(common.scene_path);
  const KoopmanModel model = io::load_model(common.model_path);

  Task task;
  task.name = "plan";
  task.start.q = start_arg.empty() ? Eigen::VectorXd::Zero(robot.chain.n_q())
                                   : parse_csv_vector(start_arg);
  task.start.qdot = Eigen::VectorXd::Zero(robot.chain.n_q());
  const Eigen::VectorXd goal = parse_csv_vector(goal_arg);
  task.goal.center = Eigen::Vector3d(goal(0), goal(1), goal(2));
  task.obstacles = scene.obstacles;
  task.bounds_lo = scene.bounds_lo;
  task.bounds_hi = scene.bounds_hi;
  task.delta = common.delta;
  task.max_control_steps = max_steps;

  PlannerConfig cfg;
  cfg.mppi.horizon = model.config.horizon;

  SimConfig sim;
  sim.dt = dt;
  if (!noise_arg.empty()) {
    sim.noise = ProcessNoise::iid(parse_noise_arg(noise_arg), 2 * robot.chain.n_q());
  }

  RobotModel arm = robot;
  if (!noise_arg.empty()) {
    const RiskBudget budget = allocate_risk_budget(task.delta, task.max_control_steps);
    const std::vector<ScalarDistribution> pred_error(robot.chain.n_q(),
                                                     parse_noise_arg(noise_arg));
    arm.ellipsoids = calibrate_ellipsoids(robot.chain, robot.ellipsoids, robot.limits,
                                          pred_error, budget.delta_ell, 20000, 17);
  }

  const PlanResult result = run_episode(task, model, arm, cfg, sim, common.seed);
  if (!common.out_path.empty()) {
    fs::create_directories(fs::path(common.out_path).parent_path().empty()
                               ? "."
                               : fs::path(common.out_path).parent_path());
    write_episode_log(common.out_path, task, result, sim.dt, common.seed);
  }
  std::printf("%s: steps=%d ttg=%.2f s length=%.3f m stalls=%d\n",
              result.success ? "SUCCESS" : "FAILURE", result.steps, result.ttg,
              result.ee_path_length, result.stall_count);
  return result.success ? kExitOk : kExitRuntime;
}

int cmd_certify(const CommonArgs& common, const std::string& q_arg) {
  const RobotModel robot = io::load_robot(common.robot_path);
  const io::Scene scene = io::load_scene(common.scene_path);
  const Eigen::VectorXd q = parse_csv_vector(q_arg);
  const RiskContourMap map =
      build_contour_map(scene.obstacles, common.delta, scene.bounds_lo, scene.bounds_hi);

  const auto ellipsoids = link_ellipsoids(robot.chain, robot.ellipsoids, q);
  SosOptions opts;
  bool solver_failure = false;
  int solves = 0;
  for (const auto& e : ellipsoids) {
    const auto counterexample = sample_falsify(map, e, 256, common.seed);
    if (counterexample) {
      std::printf("%-8s NOT_CERTIFIED (falsified at [%.4f, %.4f, %.4f])\n", e.label.c_str(),
                  counterexample->x(), counterexample->y(), counterexample->z());
      continue;
    }
    for (const auto& contour : map.contours) {
      const auto t0 = std::chrono::steady_clock::now();
      const SosProblem problem = build_certificate_problem(contour, e, opts);
      const CertResult result = sdp_feasibility_solve(problem, opts);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
      ++solves;
      const char* verdict = result.verdict == CertResult::Verdict::Certified ? "CERTIFIED"
                            : result.verdict == CertResult::Verdict::NotCertified
                                ? "NOT_CERTIFIED"
                                : "SOLVER_FAILURE";
      std::printf("%-8s vs %-12s %-14s margin=% .3e residual=%.3e  (%.1f ms)\n",
                  e.label.c_str(), contour.source.c_str(), verdict, result.margin,
                  result.residual, ms);
      if (result.verdict == CertResult::Verdict::SolverFailure) solver_failure = true;
    }
  }
  if (map.contours.empty()) std::printf("empty scene: certified, %d solves\n", solves);
  return solver_failure ? kExitRuntime : kExitOk;
}

int cmd_contour(const CommonArgs& common, const std::string& grid_arg) {
  const io::Scene scene = io::load_scene(common.scene_path);
  const RiskContourMap map =
      build_contour_map(scene.obstacles, common.delta, scene.bounds_lo, scene.bounds_hi);
  const Eigen::VectorXd grid = parse_csv_vector(grid_arg);
  const int nx = static_cast<int>(grid(0));
  const int ny = static_cast<int>(grid(1));
  const int nz = grid.size() > 2 ? static_cast<int>(grid(2)) : 1;

  io::CsvWriter csv(common.out_path);
  csv.row({"x", "y", "z", "risk_bound"});
  auto coord = [](double lo, double hi, int n, int i) {
    return n <= 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
  };
  for (int iz = 0; iz < nz; ++iz) {
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const Eigen::Vector3d p(coord(scene.bounds_lo.x(), scene.bounds_hi.x(), nx, ix),
                                coord(scene.bounds_lo.y(), scene.bounds_hi.y(), ny, iy),
                                coord(scene.bounds_lo.z(), scene.bounds_hi.z(), nz, iz));
        csv.row({io::format_double(p.x()), io::format_double(p.y()),
                 io::format_double(p.z()), io::format_double(map_risk(map, p))});
      }
    }
  }
  std::printf("wrote %dx%dx%d contour grid to %s\n", nx, ny, nz, common.out_path.c_str());
  return kExitOk;
}

int cmd_gradient_check(const CommonArgs& common, const std::string& dataset_path) {
  TrajectoryDataset data;
  KoopmanModel model;
  if (!dataset_path.empty() && !common.model_path.empty()) {
    data = io::load_dataset(dataset_path);
    model = io::load_model(common.model_path);
  } else {
    // Self-contained check on a small synthetic system.
    KoopmanConfig cfg = KoopmanConfig::defaults(4, 2);
    cfg.lift_dim = 10;
    cfg.encoder_widths = {16};
    cfg.horizon = 6;
    data.horizon = cfg.horizon;
    data.state_dim = 4;
    data.control_dim = 2;
    const int n = 32;
    data.states.resize((cfg.horizon + 1) * 4, n);
    data.controls.resize(cfg.horizon * 2, n);
    Rng rng(common.seed + 1);
    for (int t = 0; t < n; ++t) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x(i) = rng.uniform(-1, 1);
      data.states.block(0, t, 4, 1) = x;
      for (int k = 0; k < cfg.horizon; ++k) {
        Eigen::Vector2d u(rng.uniform(-1, 1), rng.uniform(-1, 1));
        x.head(2) += 0.1 * u;
        x.tail(2) = 0.9 * x.tail(2) + 0.1 * u.cwiseAbs();
        data.controls.block(2 * k, t, 2, 1) = u;
        data.states.block(4 * (k + 1), t, 4, 1) = x;
      }
    }
    model = KoopmanModel::init(cfg, data.compute_normalization(), mix_seed(common.seed, 3));
  }
  std::vector<int> idx;
  for (int i = 0; i < std::min(8, data.size()); ++i) idx.push_back(i);
  const double err = gradient_check(model, data, idx, common.seed, 1e-5, 50);
  std::printf("max relative gradient error over 50 parameters: %.3e\n", err);
  return err <= 1e-4 ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-bounded receding-horizon motion planning for serial manipulators"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string goal_arg, start_arg, q_arg, dataset_path, spec_path, grid_arg = "41,41,1";
  std::string noise_arg = "gaussian:0.05,0.05", curve_path;
  int samples = 50, horizon = 15, max_steps = 200, epochs = -1, batch_size = 0, lift_dim = 0;
  double dt = 0.1;
  bool run_gradcheck = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "RNG seed");
    cmd->add_option("--out", common.out_path, "output path");
    cmd->add_option("--delta", common.delta, "risk tolerance");
  };

  auto* gen = app.add_subcommand("gen-data", "collect a noisy rollout dataset");
  gen->add_option("--robot", common.robot_path)->required();
  gen->add_option("--goal", goal_arg, "goal position x,y,z")->required();
  gen->add_option("--start", start_arg, "start configuration q1,q2,...");
  gen->add_option("--samples", samples, "samples per waypoint");
  gen->add_option("--horizon", horizon, "rollout horizon");
  gen->add_option("--max-steps", max_steps, "nominal plan step cap");
  gen->add_option("--noise", noise_arg, "process noise kind:params");
  gen->add_option("--dt", dt, "step duration");
  add_common(gen);

  auto* train = app.add_subcommand("train", "train the dynamics model");
  train->add_option("--dataset", dataset_path)->required();
  train->add_option("--epochs", epochs);
  train->add_option("--batch", batch_size);
  train->add_option("--lift", lift_dim);
  train->add_option("--curve", curve_path, "training-curve CSV");
  train->add_flag("--gradient-check", run_gradcheck, "verify gradients before training");
  add_common(train);

  auto* bench = app.add_subcommand("bench", "run a benchmark specification");
  bench->add_option("--spec", spec_path)->required();
  bench->add_option("--model", common.model_path)->required();
  add_common(bench);

  auto* plan = app.add_subcommand("plan", "run a single planning episode");
  plan->add_option("--robot", common.robot_path)->required();
  plan->add_option("--scene", common.scene_path)->required();
  plan->add_option("--model", common.model_path)->required();
  plan->add_option("--goal", goal_arg)->required();
  plan->add_option("--start", start_arg);
  plan->add_option("--noise", noise_arg);
  plan->add_option("--max-steps", max_steps);
  plan->add_option("--dt", dt);
  add_common(plan);

  auto* certify = app.add_subcommand("certify", "certify one configuration");
  certify->add_option("--robot", common.robot_path)->required();
  certify->add_option("--scene", common.scene_path)->required();
  certify->add_option("--q", q_arg, "configuration q1,q2,...")->required();
  add_common(certify);

  auto* contour = app.add_subcommand("contour", "export a risk-bound grid");
  contour->add_option("--scene", common.scene_path)->required();
  contour->add_option("--grid", grid_arg, "nx,ny,nz");
  add_common(contour);

  auto* gradcheck = app.add_subcommand("gradient-check", "finite-difference gradient audit");
  gradcheck->add_option("--dataset", dataset_path);
  gradcheck->add_option("--model", common.model_path);
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(common, goal_arg, start_arg, samples, horizon, max_steps,
                          noise_arg, dt);
    }
    if (train->parsed()) {
      return cmd_train(common, dataset_path, epochs, batch_size, lift_dim, curve_path,
                       run_gradcheck);
    }
    if (bench->parsed()) return cmd_bench(common, spec_path);
    if (plan->parsed()) {
      return cmd_plan(common, goal_arg, start_arg, noise_arg, max_steps, dt);
    }
    if (certify->parsed()) return cmd_certify(common, q_arg);
    if (contour->parsed()) return cmd_contour(common, grid_arg);
    if (gradcheck->parsed()) return cmd_gradient_check(common, dataset_path);
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitUsage;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
