#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "riskplan/rng.hpp"

namespace riskplan {

struct KoopmanConfig {
  int state_dim = 0;
  int control_dim = 0;
  int lift_dim = 34;
  std::vector<int> encoder_widths = {64};
  int horizon = 15;
  double lr_linear = 1e-2;   // Koopman/control/decoder matrices
  double lr_encoder = 1e-3;  // encoder networks
  double entropy_weight = 0.1;
  double entropy_target = 0.0;  // set by defaults() from lift_dim
  double std_floor = 1e-6;
  int batch_size = 256;
  int epochs = 500;
  double holdout_fraction = 0.1;

  static KoopmanConfig defaults(int state_dim, int control_dim);
  void validate() const;
};

// Z-score statistics stored with the model and applied at inference.
struct Normalization {
  Eigen::VectorXd state_mean, state_std;
  Eigen::VectorXd control_mean, control_std;

  static Normalization identity(int state_dim, int control_dim);
};

// Feed-forward network: linear layers with ReLU between them, linear output.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static Mlp create(int input, const std::vector<int>& hidden, int output, Rng& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  int num_layers() const { return static_cast<int>(weights.size()); }
};

// Mini-batch of rollout snippets: one encoded start state, horizon controls,
// horizon target states. Trajectories are stored one per column.
struct TrajectoryDataset {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  Eigen::MatrixXd states;    // ((horizon+1) * state_dim) x n_traj
  Eigen::MatrixXd controls;  // (horizon * control_dim) x n_traj

  int size() const { return static_cast<int>(states.cols()); }
  void validate() const;
  Normalization compute_normalization() const;
};

// Stochastic Koopman dynamics model: a reparameterized encoder produces a
// Gaussian lift, a linear operator pair (A, B) advances the lift, and a
// linear decoder reads the state back out.
struct KoopmanModel {
  KoopmanConfig config;
  Normalization norm;
  Mlp encoder_mean;
  Mlp encoder_std;  // softplus head with a positive floor
  Eigen::MatrixXd koopman_a;  // lift x lift, no bias
  Eigen::MatrixXd control_b;  // lift x control, no bias
  Eigen::MatrixXd decoder_c;  // state x lift, no bias

  struct Encoding {
    Eigen::VectorXd psi;
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
  };

  static KoopmanModel init(const KoopmanConfig& config, const Normalization& norm,
                           std::uint64_t seed);
  // Analytic lift of the deterministic velocity integrator (no learning):
  // used as the baseline dynamics for nominal data collection.
  static KoopmanModel exact_integrator(int n_q, double dt);

  // psi = mean + eps .* std on the normalized state. Throws on non-finite x.
  Encoding encode(const Eigen::VectorXd& x, const Eigen::VectorXd& eps) const;
  Eigen::VectorXd propagate(const Eigen::VectorXd& psi, const Eigen::VectorXd& u_raw) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& psi) const;
  // One deterministic (eps = 0) model step.
  Eigen::VectorXd predict_one(const Eigen::VectorXd& x, const Eigen::VectorXd& u_raw) const;

  // N parallel rollouts from a shared start state; each rollout draws its own
  // encoder noise (or none when stochastic = false). controls is
  // (H*control_dim) x N raw; the result is (H*state_dim) x N raw.
  Eigen::MatrixXd rollout_batch(const Eigen::VectorXd& x0, const Eigen::MatrixXd& controls,
                                std::uint64_t seed, bool stochastic = true) const;

  Eigen::VectorXd normalize_state(const Eigen::VectorXd& x) const;
  Eigen::VectorXd denormalize_state(const Eigen::VectorXd& xn) const;
};

struct LossParts {
  double total = 0.0;
  double mse = 0.0;
  double entropy_penalty = 0.0;
  double entropy = 0.0;
};

// H-step prediction loss over the given trajectory columns, single stochastic
// encoding per trajectory, hinge entropy penalty toward the configured
// target. Computed in normalized units.
LossParts koopman_loss(const KoopmanModel& model, const TrajectoryDataset& data,
                       std::span<const int> indices, std::uint64_t seed);

// Flat parameter gradients in the fixed order used by the optimizer.
struct KoopmanGradients {
  std::vector<Eigen::MatrixXd> encoder_mean_w, encoder_std_w;
  std::vector<Eigen::VectorXd> encoder_mean_b, encoder_std_b;
  Eigen::MatrixXd koopman_a, control_b, decoder_c;
};

LossParts koopman_loss_grad(const KoopmanModel& model, const TrajectoryDataset& data,
                            std::span<const int> indices, std::uint64_t seed,
                            KoopmanGradients* grads);

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> holdout_mse;
  double best_holdout = 0.0;
  int best_epoch = -1;
};

// Thrown when the loss turns non-finite; carries the best checkpoint so far.
struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(KoopmanModel checkpoint)
      : std::runtime_error("training diverged (non-finite loss)"),
        last_checkpoint(std::move(checkpoint)) {}
  KoopmanModel last_checkpoint;
};

// Adam with the two configured learning-rate groups; returns the model with
// the best held-out H-step mse. Deterministic given the seed.
KoopmanModel train_koopman(const KoopmanConfig& config, const TrajectoryDataset& data,
                           std::uint64_t seed, TrainReport* report = nullptr);

// Deterministic-mode H-step mean squared prediction error in raw units over
// the given trajectory columns.
double rollout_mse(const KoopmanModel& model, const TrajectoryDataset& data,
                   std::span<const int> indices);
// Same metric for the zero-order-hold predictor x_{t+k} = x_t.
double zero_order_hold_mse(const TrajectoryDataset& data, std::span<const int> indices);

// Max relative error between analytic and central finite-difference gradients
// over n_params randomly chosen parameters.
double gradient_check(const KoopmanModel& model, const TrajectoryDataset& data,
                      std::span<const int> indices, std::uint64_t seed, double eps_fd,
                      int n_params = 50);

}  // namespace riskplan
