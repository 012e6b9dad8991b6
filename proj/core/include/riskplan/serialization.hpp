#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "riskplan/koopman_model.hpp"
#include "riskplan/planner.hpp"

namespace riskplan::io {

using nlohmann::json;

json load_json(const std::filesystem::path& path);

// Fixed-width round-trippable decimal formatting, used for every CSV cell so
// reruns are byte-identical.
std::string format_double(double value);

struct Scene {
  std::vector<UncertainObstacle> obstacles;
  Eigen::Vector3d bounds_lo = Eigen::Vector3d::Constant(-2.0);
  Eigen::Vector3d bounds_hi = Eigen::Vector3d::Constant(2.0);
};

ScalarDistribution parse_distribution(const json& spec);
json distribution_to_json(const ScalarDistribution& d);

Scene parse_scene(const json& spec);
Scene load_scene(const std::filesystem::path& path);

RobotModel parse_robot(const json& spec);
RobotModel load_robot(const std::filesystem::path& path);

// Config overrides: every key is optional and falls back to the default.
void apply_overrides(const json& spec, MppiConfig& cfg);
void apply_overrides(const json& spec, CostWeights& weights);
void apply_overrides(const json& spec, SosOptions& opts);
void apply_overrides(const json& spec, PlannerConfig& cfg);
void apply_overrides(const json& spec, KoopmanConfig& cfg);
void apply_overrides(const json& spec, DataGenConfig& cfg);

struct BenchSpec {
  std::filesystem::path robot_path;
  std::filesystem::path scene_path;
  double delta = 0.3;
  double dt = 0.1;
  ScalarDistribution noise = ScalarDistribution::gaussian(0.05, 0.05);
  bool has_noise = true;
  std::vector<Task> tasks;  // obstacles filled in by the caller from the scene
  std::vector<std::uint64_t> seeds;
  json overrides;  // optional "mppi" / "planner" / "weights" / "sos" blocks
  int collision_realizations = 1000;
  double calibration_error_std = 0.05;  // per-joint ellipsoid calibration noise
  int calibration_draws = 20000;
};

BenchSpec load_bench_spec(const std::filesystem::path& path);

// Binary artifacts with magic + version headers; doubles stored raw so
// save/load round-trips are bitwise.
void save_dataset(const std::filesystem::path& path, const TrajectoryDataset& data);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const KoopmanModel& model);
KoopmanModel load_model(const std::filesystem::path& path);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& cells);
  ~CsvWriter();

 private:
  std::string buffer_;
  std::filesystem::path path_;
};

}  // namespace riskplan::io
