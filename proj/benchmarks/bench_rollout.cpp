#include <benchmark/benchmark.h>

#include "riskplan/koopman_model.hpp"
#include "riskplan/mppi.hpp"
#include "test_helpers.hpp"

using namespace riskplan;

static void BM_RolloutBatch1000x15(benchmark::State& state) {
  KoopmanConfig cfg = KoopmanConfig::defaults(6, 3);
  const KoopmanModel model = KoopmanModel::init(cfg, Normalization::identity(6, 3), 3);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  const Eigen::MatrixXd controls = Eigen::MatrixXd::Random(15 * 3, 1000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.rollout_batch(x0, controls, 5, true));
  }
}
BENCHMARK(BM_RolloutBatch1000x15)->Unit(benchmark::kMillisecond);

static void BM_HaltonSplineSamples(benchmark::State& state) {
  const RobotModel robot = test::planar3_robot();
  MppiConfig cfg;
  cfg.n_samples = 1000;
  PolicyParams p = PolicyParams::make(cfg.horizon, 3, cfg.init_cov);
  int iteration = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(halton_spline_samples(p, cfg, robot.limits, iteration++));
  }
}
BENCHMARK(BM_HaltonSplineSamples)->Unit(benchmark::kMillisecond);

static void BM_TrainEpoch(benchmark::State& state) {
  KoopmanConfig cfg = KoopmanConfig::defaults(6, 3);
  cfg.epochs = 1;
  cfg.batch_size = 128;
  TrajectoryDataset data;
  data.horizon = cfg.horizon;
  data.state_dim = 6;
  data.control_dim = 3;
  Rng rng(9);
  const int n = 512;
  data.states.resize((cfg.horizon + 1) * 6, n);
  data.controls.resize(cfg.horizon * 3, n);
  for (long i = 0; i < data.states.size(); ++i) data.states.data()[i] = rng.gaussian();
  for (long i = 0; i < data.controls.size(); ++i) data.controls.data()[i] = rng.gaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_koopman(cfg, data, 3));
  }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond)->Iterations(3);
