#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "riskplan/koopman_model.hpp"

namespace riskplan {

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727;

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input seen by each layer
  Eigen::MatrixXd output;
};

Eigen::MatrixXd mlp_forward_cached(const Mlp& mlp, const Eigen::MatrixXd& x, MlpCache& cache) {
  cache.inputs.clear();
  Eigen::MatrixXd h = x;
  for (int l = 0; l < mlp.num_layers(); ++l) {
    cache.inputs.push_back(h);
    h = ((mlp.weights[l] * h).colwise() + mlp.biases[l]).eval();
    if (l + 1 < mlp.num_layers()) h = h.cwiseMax(0.0);
  }
  cache.output = h;
  return h;
}

void mlp_backward(const Mlp& mlp, const MlpCache& cache, const Eigen::MatrixXd& dout,
                  std::vector<Eigen::MatrixXd>& dw, std::vector<Eigen::VectorXd>& db) {
  Eigen::MatrixXd grad = dout;
  for (int l = mlp.num_layers() - 1; l >= 0; --l) {
    dw[l].noalias() += grad * cache.inputs[l].transpose();
    db[l] += grad.rowwise().sum();
    if (l > 0) {
      grad = (mlp.weights[l].transpose() * grad).eval();
      // ReLU mask: the stored input of layer l is the activation of layer l-1.
      grad = grad.cwiseProduct(
          (cache.inputs[l].array() > 0.0).cast<double>().matrix());
    }
  }
}

struct Batch {
  Eigen::MatrixXd x0n;      // state_dim x B, normalized
  Eigen::MatrixXd targets;  // (H*state_dim) x B, normalized
  Eigen::MatrixXd un;       // (H*control_dim) x B, normalized
};

Batch extract_batch(const KoopmanModel& model, const TrajectoryDataset& data,
                    std::span<const int> indices) {
  const int sd = data.state_dim, cd = data.control_dim, h = data.horizon;
  const int b = static_cast<int>(indices.size());
  Batch out;
  out.x0n.resize(sd, b);
  out.targets.resize(h * sd, b);
  out.un.resize(h * cd, b);
  for (int j = 0; j < b; ++j) {
    const int col = indices[j];
    out.x0n.col(j) =
        (data.states.block(0, col, sd, 1) - model.norm.state_mean)
            .cwiseQuotient(model.norm.state_std);
    for (int k = 1; k <= h; ++k) {
      out.targets.block((k - 1) * sd, j, sd, 1) =
          (data.states.block(k * sd, col, sd, 1) - model.norm.state_mean)
              .cwiseQuotient(model.norm.state_std);
    }
    for (int k = 0; k < h; ++k) {
      out.un.block(k * cd, j, cd, 1) =
          (data.controls.block(k * cd, col, cd, 1) - model.norm.control_mean)
              .cwiseQuotient(model.norm.control_std);
    }
  }
  return out;
}

Eigen::MatrixXd draw_eps(int rows, int cols, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x3c6));
  Eigen::MatrixXd eps(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) eps(r, c) = rng.gaussian();
  }
  return eps;
}

LossParts loss_impl(const KoopmanModel& model, const TrajectoryDataset& data,
                    std::span<const int> indices, std::uint64_t seed,
                    KoopmanGradients* grads) {
  data.validate();
  if (indices.empty()) throw std::invalid_argument("koopman_loss: empty batch");
  const int sd = data.state_dim, cd = data.control_dim, h = data.horizon;
  const int lift = model.config.lift_dim;
  const int b = static_cast<int>(indices.size());

  const Batch batch = extract_batch(model, data, indices);

  MlpCache mean_cache, std_cache;
  const Eigen::MatrixXd mean = mlp_forward_cached(model.encoder_mean, batch.x0n, mean_cache);
  const Eigen::MatrixXd std_raw =
      mlp_forward_cached(model.encoder_std, batch.x0n, std_cache);
  Eigen::MatrixXd std_out(lift, b);
  for (int c = 0; c < b; ++c) {
    for (int r = 0; r < lift; ++r) {
      const double x = std_raw(r, c);
      std_out(r, c) = (x > 30.0 ? x : std::log1p(std::exp(x))) + model.config.std_floor;
    }
  }
  const Eigen::MatrixXd eps = draw_eps(lift, b, seed);

  std::vector<Eigen::MatrixXd> psi(h + 1);
  psi[0] = mean + eps.cwiseProduct(std_out);
  for (int k = 1; k <= h; ++k) {
    psi[k].noalias() = model.koopman_a * psi[k - 1];
    psi[k].noalias() += model.control_b * batch.un.middleRows((k - 1) * cd, cd);
  }

  Eigen::MatrixXd errors(h * sd, b);
  double sq_sum = 0.0;
  for (int k = 1; k <= h; ++k) {
    Eigen::MatrixXd e = model.decoder_c * psi[k] - batch.targets.middleRows((k - 1) * sd, sd);
    sq_sum += e.squaredNorm();
    errors.middleRows((k - 1) * sd, sd) = e;
  }

  LossParts parts;
  parts.mse = sq_sum / (static_cast<double>(b) * h);
  parts.entropy = (std_out.array().log().sum()) / b + lift * kHalfLog2PiE;
  const double shortfall = model.config.entropy_target - parts.entropy;
  parts.entropy_penalty = model.config.entropy_weight * std::max(0.0, shortfall);
  parts.total = parts.mse + parts.entropy_penalty;

  if (grads == nullptr) return parts;

  // Backward pass.
  const double err_scale = 2.0 / (static_cast<double>(b) * h);
  grads->koopman_a.setZero(lift, lift);
  grads->control_b.setZero(lift, cd);
  grads->decoder_c.setZero(sd, lift);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(lift, b);  // d loss / d psi_k
  for (int k = h; k >= 1; --k) {
    const Eigen::MatrixXd de = err_scale * errors.middleRows((k - 1) * sd, sd);
    grads->decoder_c.noalias() += de * psi[k].transpose();
    g.noalias() += model.decoder_c.transpose() * de;
    grads->koopman_a.noalias() += g * psi[k - 1].transpose();
    grads->control_b.noalias() += g * batch.un.middleRows((k - 1) * cd, cd).transpose();
    g = (model.koopman_a.transpose() * g).eval();
  }

  const Eigen::MatrixXd d_mean = g;
  Eigen::MatrixXd d_std = g.cwiseProduct(eps);
  if (shortfall > 0.0) {
    // Hinge active: d penalty / d std = -weight / (B * std).
    d_std -= (model.config.entropy_weight / b) * std_out.cwiseInverse();
  }
  // d softplus(x)/dx = sigmoid(x).
  Eigen::MatrixXd d_raw(lift, b);
  for (int c = 0; c < b; ++c) {
    for (int r = 0; r < lift; ++r) {
      d_raw(r, c) = d_std(r, c) / (1.0 + std::exp(-std_raw(r, c)));
    }
  }

  grads->encoder_mean_w.assign(model.encoder_mean.num_layers(), {});
  grads->encoder_mean_b.assign(model.encoder_mean.num_layers(), {});
  grads->encoder_std_w.assign(model.encoder_std.num_layers(), {});
  grads->encoder_std_b.assign(model.encoder_std.num_layers(), {});
  for (int l = 0; l < model.encoder_mean.num_layers(); ++l) {
    grads->encoder_mean_w[l].setZero(model.encoder_mean.weights[l].rows(),
                                     model.encoder_mean.weights[l].cols());
    grads->encoder_mean_b[l].setZero(model.encoder_mean.biases[l].size());
  }
  for (int l = 0; l < model.encoder_std.num_layers(); ++l) {
    grads->encoder_std_w[l].setZero(model.encoder_std.weights[l].rows(),
                                    model.encoder_std.weights[l].cols());
    grads->encoder_std_b[l].setZero(model.encoder_std.biases[l].size());
  }
  mlp_backward(model.encoder_mean, mean_cache, d_mean, grads->encoder_mean_w,
               grads->encoder_mean_b);
  mlp_backward(model.encoder_std, std_cache, d_raw, grads->encoder_std_w,
               grads->encoder_std_b);
  (void)mean;
  return parts;
}

struct ParamView {
  double* data;
  long size;
  bool linear_group;
};

std::vector<ParamView> param_views(KoopmanModel& m) {
  std::vector<ParamView> views;
  for (auto& w : m.encoder_mean.weights) views.push_back({w.data(), w.size(), false});
  for (auto& bb : m.encoder_mean.biases) views.push_back({bb.data(), bb.size(), false});
  for (auto& w : m.encoder_std.weights) views.push_back({w.data(), w.size(), false});
  for (auto& bb : m.encoder_std.biases) views.push_back({bb.data(), bb.size(), false});
  views.push_back({m.koopman_a.data(), m.koopman_a.size(), true});
  views.push_back({m.control_b.data(), m.control_b.size(), true});
  views.push_back({m.decoder_c.data(), m.decoder_c.size(), true});
  return views;
}

std::vector<ParamView> grad_views(KoopmanGradients& g) {
  std::vector<ParamView> views;
  for (auto& w : g.encoder_mean_w) views.push_back({w.data(), w.size(), false});
  for (auto& bb : g.encoder_mean_b) views.push_back({bb.data(), bb.size(), false});
  for (auto& w : g.encoder_std_w) views.push_back({w.data(), w.size(), false});
  for (auto& bb : g.encoder_std_b) views.push_back({bb.data(), bb.size(), false});
  views.push_back({g.koopman_a.data(), g.koopman_a.size(), true});
  views.push_back({g.control_b.data(), g.control_b.size(), true});
  views.push_back({g.decoder_c.data(), g.decoder_c.size(), true});
  return views;
}

struct Adam {
  std::vector<Eigen::ArrayXd> m, v;
  long step = 0;

  void init(const std::vector<ParamView>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Eigen::ArrayXd::Zero(p.size));
      v.push_back(Eigen::ArrayXd::Zero(p.size));
    }
  }

  void update(std::vector<ParamView>& params, const std::vector<ParamView>& grads,
              double lr_linear, double lr_encoder) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Eigen::Map<Eigen::ArrayXd> theta(params[i].data, params[i].size);
      Eigen::Map<const Eigen::ArrayXd> grad(grads[i].data, grads[i].size);
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad;
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad.square();
      const double lr = params[i].linear_group ? lr_linear : lr_encoder;
      theta -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
    }
  }
};

}  // namespace

LossParts koopman_loss(const KoopmanModel& model, const TrajectoryDataset& data,
                       std::span<const int> indices, std::uint64_t seed) {
  return loss_impl(model, data, indices, seed, nullptr);
}

LossParts koopman_loss_grad(const KoopmanModel& model, const TrajectoryDataset& data,
                            std::span<const int> indices, std::uint64_t seed,
                            KoopmanGradients* grads) {
  return loss_impl(model, data, indices, seed, grads);
}

double rollout_mse(const KoopmanModel& model, const TrajectoryDataset& data,
                   std::span<const int> indices) {
  const int sd = data.state_dim, h = data.horizon;
  double sq_sum = 0.0;
  for (int idx : indices) {
    const Eigen::VectorXd x0 = data.states.block(0, idx, sd, 1);
    const Eigen::MatrixXd pred = model.rollout_batch(x0, data.controls.col(idx), 0, false);
    for (int k = 1; k <= h; ++k) {
      sq_sum += (pred.middleRows((k - 1) * sd, sd) - data.states.block(k * sd, idx, sd, 1))
                    .squaredNorm();
    }
  }
  return sq_sum / (static_cast<double>(indices.size()) * h);
}

double zero_order_hold_mse(const TrajectoryDataset& data, std::span<const int> indices) {
  const int sd = data.state_dim, h = data.horizon;
  double sq_sum = 0.0;
  for (int idx : indices) {
    const Eigen::VectorXd x0 = data.states.block(0, idx, sd, 1);
    for (int k = 1; k <= h; ++k) {
      sq_sum += (x0 - data.states.block(k * sd, idx, sd, 1)).squaredNorm();
    }
  }
  return sq_sum / (static_cast<double>(indices.size()) * h);
}

KoopmanModel train_koopman(const KoopmanConfig& config, const TrajectoryDataset& data,
                           std::uint64_t seed, TrainReport* report) {
  config.validate();
  data.validate();
  if (data.size() < 1) throw std::invalid_argument("train_koopman: empty dataset");
  if (data.horizon != config.horizon || data.state_dim != config.state_dim ||
      data.control_dim != config.control_dim) {
    throw std::invalid_argument("train_koopman: config/dataset shape mismatch");
  }

  const Normalization norm = data.compute_normalization();
  KoopmanModel model = KoopmanModel::init(config, norm, mix_seed(seed, 1));

  // Held-out split (at least one trajectory when possible).
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(seed, 2));
  for (int i = data.size() - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle_rng.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  int n_hold = static_cast<int>(std::round(config.holdout_fraction * data.size()));
  n_hold = std::clamp(n_hold, data.size() > 1 ? 1 : 0, data.size() - 1);
  std::vector<int> holdout(order.begin(), order.begin() + n_hold);
  std::vector<int> train(order.begin() + n_hold, order.end());
  if (holdout.empty()) holdout = train;

  std::vector<ParamView> params = param_views(model);
  Adam adam;
  adam.init(params);

  KoopmanModel best = model;
  double best_mse = rollout_mse(model, data, holdout);
  int best_epoch = 0;
  if (report) {
    report->train_loss.clear();
    report->holdout_mse.clear();
    report->holdout_mse.push_back(best_mse);
  }

  KoopmanGradients grads;
  std::vector<int> batch;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng(mix_seed(seed, 100 + epoch));
    std::vector<int> shuffled = train;
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(epoch_rng.next_u64() % (i + 1));
      std::swap(shuffled[i], shuffled[j]);
    }

    double epoch_loss = 0.0;
    int n_batches = 0;
    for (std::size_t start = 0; start < shuffled.size(); start += config.batch_size) {
      const std::size_t end = std::min(shuffled.size(),
                                       start + static_cast<std::size_t>(config.batch_size));
      batch.assign(shuffled.begin() + start, shuffled.begin() + end);
      const std::uint64_t batch_seed =
          mix_seed(seed, 1000003ULL * epoch + static_cast<std::uint64_t>(n_batches));
      const LossParts parts = loss_impl(model, data, batch, batch_seed, &grads);
      if (!std::isfinite(parts.total)) throw TrainingDiverged(best);
      std::vector<ParamView> gviews = grad_views(grads);
      adam.update(params, gviews, config.lr_linear, config.lr_encoder);
      epoch_loss += parts.total;
      ++n_batches;
    }

    const double holdout_mse = rollout_mse(model, data, holdout);
    if (!std::isfinite(holdout_mse)) throw TrainingDiverged(best);
    if (holdout_mse < best_mse) {
      best_mse = holdout_mse;
      best = model;
      best_epoch = epoch;
    }
    if (report) {
      report->train_loss.push_back(n_batches > 0 ? epoch_loss / n_batches : 0.0);
      report->holdout_mse.push_back(holdout_mse);
    }
  }

  if (report) {
    report->best_holdout = best_mse;
    report->best_epoch = best_epoch;
  }
  return best;
}

double gradient_check(const KoopmanModel& model, const TrajectoryDataset& data,
                      std::span<const int> indices, std::uint64_t seed, double eps_fd,
                      int n_params) {
  KoopmanModel work = model;
  KoopmanGradients grads;
  koopman_loss_grad(work, data, indices, seed, &grads);

  std::vector<ParamView> params = param_views(work);
  std::vector<ParamView> gviews = grad_views(grads);
  long total = 0;
  for (const auto& p : params) total += p.size;

  Rng rng(mix_seed(seed, 0xfd));
  double worst = 0.0;
  for (int trial = 0; trial < n_params; ++trial) {
    long flat = static_cast<long>(rng.next_u64() % static_cast<std::uint64_t>(total));
    std::size_t view = 0;
    while (flat >= params[view].size) {
      flat -= params[view].size;
      ++view;
    }
    double* slot = params[view].data + flat;
    const double analytic = gviews[view].data[flat];
    const double saved = *slot;
    *slot = saved + eps_fd;
    const double up = koopman_loss(work, data, indices, seed).total;
    *slot = saved - eps_fd;
    const double down = koopman_loss(work, data, indices, seed).total;
    *slot = saved;
    const double fd = (up - down) / (2.0 * eps_fd);
    const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(analytic - fd) / denom);
  }
  return worst;
}

}  // namespace riskplan
