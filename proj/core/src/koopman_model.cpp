#include "riskplan/koopman_model.hpp"

#include <cmath>
#include <stdexcept>

namespace riskplan {

namespace {
constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5 * ln(2*pi*e)

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
}  // namespace

KoopmanConfig KoopmanConfig::defaults(int state_dim, int control_dim) {
  KoopmanConfig c;
  c.state_dim = state_dim;
  c.control_dim = control_dim;
  // Discourage variance collapse: target the entropy of a diagonal Gaussian
  // with sigma^2 = 0.01 per lift dimension.
  c.entropy_target = c.lift_dim * (kHalfLog2PiE + 0.5 * std::log(0.01));
  return c;
}

void KoopmanConfig::validate() const {
  if (state_dim < 1 || control_dim < 1) throw std::invalid_argument("KoopmanConfig: dims");
  if (lift_dim <= state_dim) {
    throw std::invalid_argument("KoopmanConfig: lift_dim must exceed state_dim");
  }
  if (horizon < 1) throw std::invalid_argument("KoopmanConfig: horizon must be >= 1");
}

Normalization Normalization::identity(int state_dim, int control_dim) {
  Normalization n;
  n.state_mean = Eigen::VectorXd::Zero(state_dim);
  n.state_std = Eigen::VectorXd::Ones(state_dim);
  n.control_mean = Eigen::VectorXd::Zero(control_dim);
  n.control_std = Eigen::VectorXd::Ones(control_dim);
  return n;
}

Mlp Mlp::create(int input, const std::vector<int>& hidden, int output, Rng& rng) {
  Mlp mlp;
  std::vector<int> dims;
  dims.push_back(input);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (int j = 0; j < in; ++j) {
      for (int i = 0; i < out; ++i) w(i, j) = rng.uniform(-bound, bound);
    }
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return mlp;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    h = (weights[l] * h).colwise() + biases[l];
    if (l + 1 < num_layers()) h = h.cwiseMax(0.0);
  }
  return h;
}

void TrajectoryDataset::validate() const {
  if (horizon < 1 || state_dim < 1 || control_dim < 1) {
    throw std::invalid_argument("TrajectoryDataset: bad dimensions");
  }
  if (states.rows() != (horizon + 1) * state_dim || controls.rows() != horizon * control_dim ||
      states.cols() != controls.cols()) {
    throw std::invalid_argument("TrajectoryDataset: shape mismatch");
  }
}

Normalization TrajectoryDataset::compute_normalization() const {
  validate();
  Normalization n;
  n.state_mean = Eigen::VectorXd::Zero(state_dim);
  n.state_std = Eigen::VectorXd::Zero(state_dim);
  n.control_mean = Eigen::VectorXd::Zero(control_dim);
  n.control_std = Eigen::VectorXd::Zero(control_dim);

  const int n_states = (horizon + 1) * size();
  for (int k = 0; k <= horizon; ++k) {
    n.state_mean += states.middleRows(k * state_dim, state_dim).rowwise().sum();
  }
  n.state_mean /= n_states;
  for (int k = 0; k <= horizon; ++k) {
    n.state_std += (states.middleRows(k * state_dim, state_dim).colwise() - n.state_mean)
                       .array()
                       .square()
                       .matrix()
                       .rowwise()
                       .sum();
  }
  n.state_std = (n.state_std / n_states).cwiseSqrt().cwiseMax(1e-8);

  const int n_controls = horizon * size();
  for (int k = 0; k < horizon; ++k) {
    n.control_mean += controls.middleRows(k * control_dim, control_dim).rowwise().sum();
  }
  n.control_mean /= n_controls;
  for (int k = 0; k < horizon; ++k) {
    n.control_std +=
        (controls.middleRows(k * control_dim, control_dim).colwise() - n.control_mean)
            .array()
            .square()
            .matrix()
            .rowwise()
            .sum();
  }
  n.control_std = (n.control_std / n_controls).cwiseSqrt().cwiseMax(1e-8);
  return n;
}

KoopmanModel KoopmanModel::init(const KoopmanConfig& config, const Normalization& norm,
                                std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  KoopmanModel m;
  m.config = config;
  m.norm = norm;
  m.encoder_mean = Mlp::create(config.state_dim, config.encoder_widths, config.lift_dim, rng);
  m.encoder_std = Mlp::create(config.state_dim, config.encoder_widths, config.lift_dim, rng);
  // Start the lift dynamics near identity so early rollouts stay bounded.
  m.koopman_a = Eigen::MatrixXd::Identity(config.lift_dim, config.lift_dim);
  m.control_b = Eigen::MatrixXd::Zero(config.lift_dim, config.control_dim);
  m.decoder_c = Eigen::MatrixXd::Zero(config.state_dim, config.lift_dim);
  for (int j = 0; j < config.lift_dim; ++j) {
    for (int i = 0; i < config.state_dim; ++i) {
      m.decoder_c(i, j) = rng.uniform(-0.1, 0.1);
    }
  }
  return m;
}

KoopmanModel KoopmanModel::exact_integrator(int n_q, double dt) {
  const int state_dim = 2 * n_q;
  KoopmanConfig config = KoopmanConfig::defaults(state_dim, n_q);
  config.lift_dim = state_dim + 1;
  config.encoder_widths = {2 * state_dim};
  KoopmanModel m;
  m.config = config;
  m.norm = Normalization::identity(state_dim, n_q);

  // relu(x) - relu(-x) = x reproduces the identity exactly through one
  // hidden layer.
  const int h = 2 * state_dim;
  Eigen::MatrixXd w1(h, state_dim);
  w1 << Eigen::MatrixXd::Identity(state_dim, state_dim),
      -Eigen::MatrixXd::Identity(state_dim, state_dim);
  Eigen::MatrixXd w2 = Eigen::MatrixXd::Zero(config.lift_dim, h);
  w2.topLeftCorner(state_dim, state_dim) = Eigen::MatrixXd::Identity(state_dim, state_dim);
  w2.block(0, state_dim, state_dim, state_dim) =
      -Eigen::MatrixXd::Identity(state_dim, state_dim);
  m.encoder_mean.weights = {w1, w2};
  m.encoder_mean.biases = {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(config.lift_dim)};
  // Saturated softplus head: std collapses to the floor.
  m.encoder_std.weights = {Eigen::MatrixXd::Zero(h, state_dim),
                           Eigen::MatrixXd::Zero(config.lift_dim, h)};
  m.encoder_std.biases = {Eigen::VectorXd::Zero(h),
                          Eigen::VectorXd::Constant(config.lift_dim, -60.0)};

  // q' = q + dt*u, qdot' = u on the embedded state.
  m.koopman_a = Eigen::MatrixXd::Zero(config.lift_dim, config.lift_dim);
  m.koopman_a.topLeftCorner(n_q, n_q) = Eigen::MatrixXd::Identity(n_q, n_q);
  m.control_b = Eigen::MatrixXd::Zero(config.lift_dim, n_q);
  m.control_b.topLeftCorner(n_q, n_q) = dt * Eigen::MatrixXd::Identity(n_q, n_q);
  m.control_b.block(n_q, 0, n_q, n_q) = Eigen::MatrixXd::Identity(n_q, n_q);
  m.decoder_c = Eigen::MatrixXd::Zero(state_dim, config.lift_dim);
  m.decoder_c.topLeftCorner(state_dim, state_dim) =
      Eigen::MatrixXd::Identity(state_dim, state_dim);
  return m;
}

Eigen::VectorXd KoopmanModel::normalize_state(const Eigen::VectorXd& x) const {
  return (x - norm.state_mean).cwiseQuotient(norm.state_std);
}

Eigen::VectorXd KoopmanModel::denormalize_state(const Eigen::VectorXd& xn) const {
  return xn.cwiseProduct(norm.state_std) + norm.state_mean;
}

KoopmanModel::Encoding KoopmanModel::encode(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& eps) const {
  if (!x.allFinite()) throw std::invalid_argument("encode: non-finite state");
  if (x.size() != config.state_dim || eps.size() != config.lift_dim) {
    throw std::invalid_argument("encode: dimension mismatch");
  }
  const Eigen::VectorXd xn = normalize_state(x);
  Encoding out;
  out.mean = encoder_mean.forward(xn);
  Eigen::VectorXd raw = encoder_std.forward(xn);
  out.std.resize(config.lift_dim);
  for (int i = 0; i < config.lift_dim; ++i) out.std(i) = softplus(raw(i)) + config.std_floor;
  out.psi = out.mean + eps.cwiseProduct(out.std);
  return out;
}

Eigen::VectorXd KoopmanModel::propagate(const Eigen::VectorXd& psi,
                                        const Eigen::VectorXd& u_raw) const {
  const Eigen::VectorXd un = (u_raw - norm.control_mean).cwiseQuotient(norm.control_std);
  return koopman_a * psi + control_b * un;
}

Eigen::VectorXd KoopmanModel::decode(const Eigen::VectorXd& psi) const {
  return denormalize_state(decoder_c * psi);
}

Eigen::VectorXd KoopmanModel::predict_one(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u_raw) const {
  const Encoding enc = encode(x, Eigen::VectorXd::Zero(config.lift_dim));
  return decode(propagate(enc.psi, u_raw));
}

Eigen::MatrixXd KoopmanModel::rollout_batch(const Eigen::VectorXd& x0,
                                            const Eigen::MatrixXd& controls,
                                            std::uint64_t seed, bool stochastic) const {
  const int n = static_cast<int>(controls.cols());
  if (controls.rows() % config.control_dim != 0) {
    throw std::invalid_argument("rollout_batch: controls must be (H*control_dim) x N");
  }
  const int h = static_cast<int>(controls.rows()) / config.control_dim;
  const Encoding enc = encode(x0, Eigen::VectorXd::Zero(config.lift_dim));

  Eigen::MatrixXd psi(config.lift_dim, n);
  if (stochastic) {
    Rng rng(mix_seed(seed, 0xe95));
    Eigen::MatrixXd eps(config.lift_dim, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < config.lift_dim; ++r) eps(r, c) = rng.gaussian();
    }
    psi = (eps.array().colwise() * enc.std.array()).matrix();
    psi.colwise() += enc.mean;
  } else {
    psi.colwise() = enc.mean;
  }

  Eigen::MatrixXd states(h * config.state_dim, n);
  for (int k = 0; k < h; ++k) {
    Eigen::MatrixXd un = controls.middleRows(k * config.control_dim, config.control_dim);
    un.colwise() -= norm.control_mean;
    un.array().colwise() /= norm.control_std.array();
    psi = (koopman_a * psi + control_b * un).eval();
    Eigen::MatrixXd xn = decoder_c * psi;
    xn.array().colwise() *= norm.state_std.array();
    xn.colwise() += norm.state_mean;
    states.middleRows(k * config.state_dim, config.state_dim) = xn;
  }
  return states;
}

}  // namespace riskplan
