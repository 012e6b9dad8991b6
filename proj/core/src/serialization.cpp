#include "riskplan/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace riskplan::io {

namespace {

constexpr std::uint32_t kDatasetMagic = 0x52504453;  // "RPDS"
constexpr std::uint32_t kModelMagic = 0x52504b4d;    // "RPKM"
constexpr std::uint32_t kFormatVersion = 1;

Eigen::Vector3d parse_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::VectorXd parse_vector(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

Eigen::Isometry3d parse_transform(const json& j) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (j.contains("translation")) t.translation() = parse_vec3(j.at("translation"));
  if (j.contains("rpy")) {
    const Eigen::Vector3d rpy = parse_vec3(j.at("rpy"));
    t.linear() = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
  }
  return t;
}

template <typename T>
void read_raw(std::istream& in, T* out, std::size_t count = 1) {
  in.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(sizeof(T) * count));
  if (!in) throw std::runtime_error("binary read failed (truncated file?)");
}

template <typename T>
void write_raw(std::ostream& out, const T* data, std::size_t count = 1) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(sizeof(T) * count));
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  const std::uint64_t rows = m.rows(), cols = m.cols();
  write_raw(out, &rows);
  write_raw(out, &cols);
  write_raw(out, m.data(), m.size());
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  std::uint64_t rows = 0, cols = 0;
  read_raw(in, &rows);
  read_raw(in, &cols);
  Eigen::MatrixXd m(rows, cols);
  read_raw(in, m.data(), m.size());
  return m;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  const std::uint64_t n = v.size();
  write_raw(out, &n);
  write_raw(out, v.data(), v.size());
}

Eigen::VectorXd read_vector(std::istream& in) {
  std::uint64_t n = 0;
  read_raw(in, &n);
  Eigen::VectorXd v(n);
  read_raw(in, v.data(), v.size());
  return v;
}

void write_mlp(std::ostream& out, const Mlp& mlp) {
  const std::uint64_t layers = mlp.num_layers();
  write_raw(out, &layers);
  for (int l = 0; l < mlp.num_layers(); ++l) {
    write_matrix(out, mlp.weights[l]);
    write_vector(out, mlp.biases[l]);
  }
}

Mlp read_mlp(std::istream& in) {
  std::uint64_t layers = 0;
  read_raw(in, &layers);
  Mlp mlp;
  for (std::uint64_t l = 0; l < layers; ++l) {
    mlp.weights.push_back(read_matrix(in));
    mlp.biases.push_back(read_vector(in));
  }
  return mlp;
}

}  // namespace

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

ScalarDistribution parse_distribution(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  const auto& p = spec.at("params");
  if (kind == "uniform") {
    return ScalarDistribution::uniform(p.at(0).get<double>(), p.at(1).get<double>());
  }
  if (kind == "gaussian") {
    return ScalarDistribution::gaussian(p.at(0).get<double>(), p.at(1).get<double>());
  }
  if (kind == "beta") {
    return ScalarDistribution::beta(p.at(0).get<double>(), p.at(1).get<double>(),
                                    p.at(2).get<double>(), p.at(3).get<double>());
  }
  throw std::invalid_argument("unknown distribution kind: " + kind);
}

json distribution_to_json(const ScalarDistribution& d) {
  json spec;
  switch (d.kind) {
    case ScalarDistribution::Kind::Uniform:
      spec["kind"] = "uniform";
      spec["params"] = {d.a, d.b};
      break;
    case ScalarDistribution::Kind::Gaussian:
      spec["kind"] = "gaussian";
      spec["params"] = {d.a, d.b};
      break;
    case ScalarDistribution::Kind::Beta:
      spec["kind"] = "beta";
      spec["params"] = {d.a, d.b, d.lo, d.hi};
      break;
  }
  return spec;
}

Scene parse_scene(const json& spec) {
  Scene scene;
  if (spec.contains("workspace")) {
    scene.bounds_lo = parse_vec3(spec.at("workspace").at("lo"));
    scene.bounds_hi = parse_vec3(spec.at("workspace").at("hi"));
  }
  for (const auto& ob : spec.at("obstacles")) {
    std::vector<std::string> variables;
    for (const auto& v : ob.at("variables")) variables.push_back(v.get<std::string>());
    Polynomial poly(variables);
    for (const auto& term : ob.at("terms")) {
      Polynomial::Exponents exps;
      for (const auto& e : term.at("exponents")) exps.push_back(e.get<int>());
      poly.add_term(exps, term.at("coeff").get<double>());
    }
    if (ob.contains("pose")) {
      // Obstacle authored in canonical coordinates; move it to the scene pose
      // by substituting p -> (p - t) / scale for the position variables.
      const auto& pose = ob.at("pose");
      const Eigen::Vector3d t =
          pose.contains("translation") ? parse_vec3(pose.at("translation"))
                                       : Eigen::Vector3d::Zero();
      const double scale = pose.value("scale", 1.0);
      for (int axis = 0; axis < 3; ++axis) {
        poly = poly.substitute_affine(axis, -t(axis) / scale, 1.0 / scale);
      }
    }
    ScalarDistribution omega = ob.contains("omega")
                                   ? parse_distribution(ob.at("omega"))
                                   : ScalarDistribution::gaussian(0.0, 1e-12);
    scene.obstacles.push_back(UncertainObstacle::make(
        std::move(poly), omega, ob.value("name", "obstacle"), "omega"));
  }
  return scene;
}

Scene load_scene(const std::filesystem::path& path) { return parse_scene(load_json(path)); }

RobotModel parse_robot(const json& spec) {
  RobotModel robot;
  robot.name = spec.value("name", "robot");
  for (const auto& j : spec.at("joints")) {
    Joint joint;
    joint.parent_transform = parse_transform(j);
    joint.axis = parse_vec3(j.at("axis")).normalized();
    robot.chain.joints.push_back(joint);
  }
  if (spec.contains("ee_offset")) {
    robot.chain.ee_offset = parse_transform(spec.at("ee_offset"));
  }
  robot.chain.validate();

  const auto& lim = spec.at("limits");
  robot.limits.q_min = parse_vector(lim.at("q_min"));
  robot.limits.q_max = parse_vector(lim.at("q_max"));
  robot.limits.v_max = parse_vector(lim.at("v_max"));
  robot.limits.u_max = parse_vector(lim.at("u_max"));
  robot.limits.validate();

  if (spec.contains("ellipsoids")) {
    const auto& ell = spec.at("ellipsoids");
    robot.ellipsoids.margin = ell.value("margin", 0.02);
    robot.ellipsoids.inflation = ell.value("inflation", 1.0);
    robot.ellipsoids.points_per_link = ell.value("points_per_link", 32);
    robot.ellipsoids.inflation_cap = ell.value("inflation_cap", 10.0);
    if (ell.contains("links")) {
      for (const auto& l : ell.at("links")) {
        LinkSpec link;
        link.anchor_a = l.at("anchors").at(0).get<int>();
        link.anchor_b = l.at("anchors").at(1).get<int>();
        link.capsule_radius = l.value("capsule_radius", 0.04);
        robot.ellipsoids.links.push_back(link);
      }
    }
  }
  if (robot.ellipsoids.links.empty()) {
    const double radius = spec.value("capsule_radius", 0.04);
    robot.ellipsoids.links = LinkEllipsoidSpec::consecutive(robot.chain, radius).links;
  }
  robot.ellipsoids.validate(robot.chain);
  return robot;
}

RobotModel load_robot(const std::filesystem::path& path) {
  return parse_robot(load_json(path));
}

void apply_overrides(const json& spec, MppiConfig& cfg) {
  cfg.n_samples = spec.value("n_samples", cfg.n_samples);
  cfg.horizon = spec.value("horizon", cfg.horizon);
  cfg.iterations = spec.value("iterations", cfg.iterations);
  cfg.gamma = spec.value("gamma", cfg.gamma);
  cfg.alpha_mu = spec.value("alpha_mu", cfg.alpha_mu);
  cfg.alpha_sigma = spec.value("alpha_sigma", cfg.alpha_sigma);
  cfg.beta_temp = spec.value("beta_temp", cfg.beta_temp);
  cfg.n_knots = spec.value("n_knots", cfg.n_knots);
  cfg.cov_floor = spec.value("cov_floor", cfg.cov_floor);
  cfg.init_cov = spec.value("init_cov", cfg.init_cov);
  cfg.halton_burn_in = spec.value("halton_burn_in", cfg.halton_burn_in);
}

void apply_overrides(const json& spec, CostWeights& weights) {
  weights.alpha_p = spec.value("alpha_p", weights.alpha_p);
  weights.alpha_o = spec.value("alpha_o", weights.alpha_o);
  weights.alpha_c = spec.value("alpha_c", weights.alpha_c);
  weights.alpha_lim = spec.value("alpha_lim", weights.alpha_lim);
  weights.alpha_cert = spec.value("alpha_cert", weights.alpha_cert);
}

void apply_overrides(const json& spec, SosOptions& opts) {
  opts.tol_eq = spec.value("tol_eq", opts.tol_eq);
  opts.tol_psd = spec.value("tol_psd", opts.tol_psd);
  opts.max_iterations = spec.value("max_iterations", opts.max_iterations);
  opts.max_contour_degree = spec.value("max_contour_degree", opts.max_contour_degree);
}

void apply_overrides(const json& spec, PlannerConfig& cfg) {
  if (spec.contains("mppi")) apply_overrides(spec.at("mppi"), cfg.mppi);
  if (spec.contains("weights")) apply_overrides(spec.at("weights"), cfg.weights);
  if (spec.contains("sos")) apply_overrides(spec.at("sos"), cfg.sos);
  cfg.max_retries = spec.value("max_retries", cfg.max_retries);
  cfg.stall_limit = spec.value("stall_limit", cfg.stall_limit);
  cfg.falsify_samples = spec.value("falsify_samples", cfg.falsify_samples);
  cfg.guidance_delta_fraction =
      spec.value("guidance_delta_fraction", cfg.guidance_delta_fraction);
  cfg.cost_points_per_link = spec.value("cost_points_per_link", cfg.cost_points_per_link);
  cfg.parallel_certification =
      spec.value("parallel_certification", cfg.parallel_certification);
}

void apply_overrides(const json& spec, KoopmanConfig& cfg) {
  cfg.lift_dim = spec.value("lift_dim", cfg.lift_dim);
  if (spec.contains("encoder_widths")) {
    cfg.encoder_widths.clear();
    for (const auto& w : spec.at("encoder_widths")) cfg.encoder_widths.push_back(w.get<int>());
  }
  cfg.horizon = spec.value("horizon", cfg.horizon);
  cfg.lr_linear = spec.value("lr_linear", cfg.lr_linear);
  cfg.lr_encoder = spec.value("lr_encoder", cfg.lr_encoder);
  cfg.entropy_weight = spec.value("entropy_weight", cfg.entropy_weight);
  cfg.entropy_target = spec.value("entropy_target", cfg.entropy_target);
  cfg.batch_size = spec.value("batch_size", cfg.batch_size);
  cfg.epochs = spec.value("epochs", cfg.epochs);
  cfg.holdout_fraction = spec.value("holdout_fraction", cfg.holdout_fraction);
}

void apply_overrides(const json& spec, DataGenConfig& cfg) {
  cfg.samples_per_waypoint = spec.value("samples_per_waypoint", cfg.samples_per_waypoint);
  cfg.horizon = spec.value("horizon", cfg.horizon);
  if (spec.contains("position_offset")) {
    cfg.position_offset = parse_distribution(spec.at("position_offset"));
  }
  if (spec.contains("velocity_offset")) {
    cfg.velocity_offset = parse_distribution(spec.at("velocity_offset"));
  }
  cfg.action_cov = spec.value("action_cov", cfg.action_cov);
}

BenchSpec load_bench_spec(const std::filesystem::path& path) {
  const json spec = load_json(path);
  BenchSpec bench;
  const auto base = path.parent_path();
  bench.robot_path = base / spec.at("robot").get<std::string>();
  bench.scene_path = base / spec.at("scene").get<std::string>();
  bench.delta = spec.value("delta", 0.3);
  bench.dt = spec.value("dt", 0.1);
  if (spec.contains("noise")) {
    bench.noise = parse_distribution(spec.at("noise"));
    bench.has_noise = true;
  } else {
    bench.has_noise = false;
  }
  for (const auto& t : spec.at("tasks")) {
    Task task;
    task.name = t.value("name", "task");
    task.start.q = parse_vector(t.at("start_q"));
    task.start.qdot = t.contains("start_qdot") ? parse_vector(t.at("start_qdot"))
                                               : Eigen::VectorXd::Zero(task.start.q.size());
    task.goal.center = parse_vec3(t.at("goal"));
    task.goal.radius = t.value("goal_radius", 0.1);
    if (t.contains("goal_axis")) task.goal_axis = parse_vec3(t.at("goal_axis"));
    task.delta = t.value("delta", bench.delta);
    task.max_control_steps = t.value("max_steps", 200);
    task.time_budget = t.value("time_budget", 1e9);
    bench.tasks.push_back(std::move(task));
  }
  for (const auto& s : spec.at("seeds")) bench.seeds.push_back(s.get<std::uint64_t>());
  if (spec.contains("overrides")) bench.overrides = spec.at("overrides");
  bench.collision_realizations =
      spec.value("collision_realizations", bench.collision_realizations);
  bench.calibration_error_std =
      spec.value("calibration_error_std", bench.calibration_error_std);
  bench.calibration_draws = spec.value("calibration_draws", bench.calibration_draws);
  return bench;
}

void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& data) {
  data.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_raw(out, &kDatasetMagic);
  write_raw(out, &kFormatVersion);
  const std::uint32_t h = data.horizon, sd = data.state_dim, cd = data.control_dim;
  write_raw(out, &h);
  write_raw(out, &sd);
  write_raw(out, &cd);
  write_matrix(out, data.states);
  write_matrix(out, data.controls);
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint32_t magic = 0, version = 0;
  read_raw(in, &magic);
  read_raw(in, &version);
  if (magic != kDatasetMagic) throw std::runtime_error("not a dataset file: " + path.string());
  if (version != kFormatVersion) throw std::runtime_error("unsupported dataset version");
  TrajectoryDataset data;
  std::uint32_t h = 0, sd = 0, cd = 0;
  read_raw(in, &h);
  read_raw(in, &sd);
  read_raw(in, &cd);
  data.horizon = h;
  data.state_dim = sd;
  data.control_dim = cd;
  data.states = read_matrix(in);
  data.controls = read_matrix(in);
  data.validate();
  return data;
}

void save_model(const std::filesystem::path& path, const KoopmanModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_raw(out, &kModelMagic);
  write_raw(out, &kFormatVersion);
  const auto& c = model.config;
  const std::uint32_t dims[4] = {static_cast<std::uint32_t>(c.state_dim),
                                 static_cast<std::uint32_t>(c.control_dim),
                                 static_cast<std::uint32_t>(c.lift_dim),
                                 static_cast<std::uint32_t>(c.horizon)};
  write_raw(out, dims, 4);
  const std::uint64_t n_widths = c.encoder_widths.size();
  write_raw(out, &n_widths);
  for (int w : c.encoder_widths) {
    const std::uint32_t w32 = static_cast<std::uint32_t>(w);
    write_raw(out, &w32);
  }
  const double scalars[7] = {c.lr_linear,      c.lr_encoder, c.entropy_weight,
                             c.entropy_target, c.std_floor,  static_cast<double>(c.batch_size),
                             static_cast<double>(c.epochs)};
  write_raw(out, scalars, 7);
  write_vector(out, model.norm.state_mean);
  write_vector(out, model.norm.state_std);
  write_vector(out, model.norm.control_mean);
  write_vector(out, model.norm.control_std);
  write_mlp(out, model.encoder_mean);
  write_mlp(out, model.encoder_std);
  write_matrix(out, model.koopman_a);
  write_matrix(out, model.control_b);
  write_matrix(out, model.decoder_c);
}

KoopmanModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint32_t magic = 0, version = 0;
  read_raw(in, &magic);
  read_raw(in, &version);
  if (magic != kModelMagic) throw std::runtime_error("not a model file: " + path.string());
  if (version != kFormatVersion) throw std::runtime_error("unsupported model version");

  KoopmanModel model;
  std::uint32_t dims[4];
  read_raw(in, dims, 4);
  model.config.state_dim = dims[0];
  model.config.control_dim = dims[1];
  model.config.lift_dim = dims[2];
  model.config.horizon = dims[3];
  std::uint64_t n_widths = 0;
  read_raw(in, &n_widths);
  model.config.encoder_widths.clear();
  for (std::uint64_t i = 0; i < n_widths; ++i) {
    std::uint32_t w = 0;
    read_raw(in, &w);
    model.config.encoder_widths.push_back(static_cast<int>(w));
  }
  double scalars[7];
  read_raw(in, scalars, 7);
  model.config.lr_linear = scalars[0];
  model.config.lr_encoder = scalars[1];
  model.config.entropy_weight = scalars[2];
  model.config.entropy_target = scalars[3];
  model.config.std_floor = scalars[4];
  model.config.batch_size = static_cast<int>(scalars[5]);
  model.config.epochs = static_cast<int>(scalars[6]);
  model.norm.state_mean = read_vector(in);
  model.norm.state_std = read_vector(in);
  model.norm.control_mean = read_vector(in);
  model.norm.control_std = read_vector(in);
  model.encoder_mean = read_mlp(in);
  model.encoder_std = read_mlp(in);
  model.koopman_a = read_matrix(in);
  model.control_b = read_matrix(in);
  model.decoder_c = read_matrix(in);
  return model;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) {}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) buffer_ += ',';
    buffer_ += cells[i];
  }
  buffer_ += '\n';
}

CsvWriter::~CsvWriter() {
  std::ofstream out(path_, std::ios::binary);
  out << buffer_;
}

}  // namespace riskplan::io
