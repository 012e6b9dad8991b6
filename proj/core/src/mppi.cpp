#include "riskplan/mppi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "riskplan/lowdisc.hpp"

namespace riskplan {

namespace {

// Cox-de Boor on a clamped uniform knot vector.
double bspline_basis(const std::vector<double>& knots, int i, int degree, double t) {
  if (degree == 0) {
    return (t >= knots[i] && t < knots[i + 1]) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  const double den_l = knots[i + degree] - knots[i];
  if (den_l > 0.0) left = (t - knots[i]) / den_l * bspline_basis(knots, i, degree - 1, t);
  const double den_r = knots[i + degree + 1] - knots[i + 1];
  if (den_r > 0.0) {
    right = (knots[i + degree + 1] - t) / den_r * bspline_basis(knots, i + 1, degree - 1, t);
  }
  return left + right;
}

}  // namespace

Eigen::MatrixXd bspline_basis_matrix(int horizon, int n_knots) {
  constexpr int kDegree = 3;
  if (n_knots < kDegree + 1) {
    throw std::invalid_argument("bspline_basis_matrix: need at least degree+1 knots");
  }
  // Clamped knot vector with uniform interior knots.
  std::vector<double> knots(n_knots + kDegree + 1);
  const int interior = n_knots - kDegree - 1;
  for (int i = 0; i <= kDegree; ++i) knots[i] = 0.0;
  for (int i = 0; i < interior; ++i) {
    knots[kDegree + 1 + i] = static_cast<double>(i + 1) / (interior + 1);
  }
  for (int i = 0; i <= kDegree; ++i) knots[n_knots + i] = 1.0;

  Eigen::MatrixXd basis(horizon, n_knots);
  for (int h = 0; h < horizon; ++h) {
    double t = horizon > 1 ? static_cast<double>(h) / (horizon - 1) : 0.0;
    if (t >= 1.0) t = 1.0 - 1e-12;  // half-open basis support at the right end
    for (int k = 0; k < n_knots; ++k) basis(h, k) = bspline_basis(knots, k, kDegree, t);
  }
  return basis;
}

PolicyParams PolicyParams::make(int horizon, int control_dim, double init_cov) {
  PolicyParams p;
  p.mean = Eigen::VectorXd::Zero(horizon * control_dim);
  p.cov_diag = Eigen::VectorXd::Constant(horizon * control_dim, init_cov);
  return p;
}

void PolicyParams::validate() const {
  if ((cov_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("PolicyParams: covariance diagonal must be positive");
  }
}

void MppiConfig::validate() const {
  if (n_samples < 1 || horizon < 1 || iterations < 1) {
    throw std::invalid_argument("MppiConfig: counts must be positive");
  }
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("MppiConfig: gamma in [0,1]");
  if (alpha_mu <= 0.0 || alpha_mu > 1.0 || alpha_sigma < 0.0 || alpha_sigma > 1.0) {
    throw std::invalid_argument("MppiConfig: step sizes in (0,1]");
  }
  if (beta_temp <= 0.0) throw std::invalid_argument("MppiConfig: beta_temp must be positive");
}

Eigen::MatrixXd halton_spline_samples(const PolicyParams& p, const MppiConfig& cfg,
                                      const Limits& lim, int iteration_index) {
  cfg.validate();
  p.validate();
  const int cd = static_cast<int>(lim.u_max.size());
  const int h = cfg.horizon;
  if (p.mean.size() != h * cd) throw std::invalid_argument("halton_spline_samples: shape");

  const Eigen::MatrixXd basis = bspline_basis_matrix(h, cfg.n_knots);
  const std::vector<int> bases = first_primes(cfg.n_knots * cd);

  Eigen::MatrixXd samples(h * cd, cfg.n_samples);
  Eigen::VectorXd clipped_mean = p.mean;
  for (int k = 0; k < h; ++k) {
    clipped_mean.segment(k * cd, cd) =
        clipped_mean.segment(k * cd, cd).cwiseMin(lim.u_max).cwiseMax(-lim.u_max);
  }
  samples.col(0) = clipped_mean;  // elite retention

  Eigen::MatrixXd knot_values(cfg.n_knots, cd);
  for (int n = 1; n < cfg.n_samples; ++n) {
    const std::uint64_t index = static_cast<std::uint64_t>(cfg.halton_burn_in) +
                                static_cast<std::uint64_t>(iteration_index) *
                                    static_cast<std::uint64_t>(cfg.n_samples) +
                                static_cast<std::uint64_t>(n);
    for (int k = 0; k < cfg.n_knots; ++k) {
      // Knot scale comes from the covariance at the nearest horizon step.
      const int near =
          cfg.n_knots > 1 ? static_cast<int>(std::lround(static_cast<double>(k) * (h - 1) /
                                                         (cfg.n_knots - 1)))
                          : 0;
      for (int j = 0; j < cd; ++j) {
        double u = radical_inverse(index, bases[k * cd + j]);
        u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        knot_values(k, j) =
            inverse_normal_cdf(u) * std::sqrt(p.cov_diag(near * cd + j));
      }
    }
    const Eigen::MatrixXd perturbation = basis * knot_values;  // h x cd
    for (int k = 0; k < h; ++k) {
      samples.col(n).segment(k * cd, cd) =
          (p.mean.segment(k * cd, cd) + perturbation.row(k).transpose())
              .cwiseMin(lim.u_max)
              .cwiseMax(-lim.u_max);
    }
  }
  return samples;
}

void finalize_costs(RolloutCosts& costs, double gamma, double beta_temp) {
  const int n = static_cast<int>(costs.per_step.rows());
  const int h = static_cast<int>(costs.per_step.cols());
  costs.per_sample_total = Eigen::VectorXd::Zero(n);
  double discount = 1.0;
  for (int k = 0; k < h; ++k) {
    costs.per_sample_total += discount * costs.per_step.col(k);
    discount *= gamma;
  }
  const double baseline = costs.per_sample_total.minCoeff();
  costs.weights =
      ((-(costs.per_sample_total.array() - baseline)) / beta_temp).exp().matrix();
}

RolloutCosts evaluate_costs(const Eigen::MatrixXd& states, const Eigen::MatrixXd& controls,
                            const SceneContext& scene, const MppiConfig& cfg) {
  const RobotModel& robot = *scene.robot;
  const int n_q = robot.chain.n_q();
  const int sd = 2 * n_q;
  const int n = static_cast<int>(states.cols());
  const int h = cfg.horizon;
  if (states.rows() != h * sd || controls.cols() != n) {
    throw std::invalid_argument("evaluate_costs: shape mismatch");
  }

  RolloutCosts costs;
  costs.per_step.resize(n, h);
  LinkEllipsoidSpec cost_spec = robot.ellipsoids;
  if (scene.cost_points_per_link > 0) cost_spec.points_per_link = scene.cost_points_per_link;
  JointState x;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < h; ++k) {
      x.q = states.block(k * sd, i, n_q, 1);
      x.qdot = states.block(k * sd + n_q, i, n_q, 1);
      const Eigen::VectorXd u = controls.block(k * n_q, i, n_q, 1);

      const FkResult fk = forward_kinematics(robot.chain, x.q);
      double c = scene.weights.alpha_p * (fk.ee - scene.goal.center).norm();
      if (scene.goal_axis && scene.weights.alpha_o > 0.0) {
        const Eigen::Vector3d approach = fk.ee_frame.rotation().col(2);
        const double cosang =
            std::clamp(approach.dot(scene.goal_axis->normalized()), -1.0, 1.0);
        c += scene.weights.alpha_o * std::acos(cosang);
      }
      if (scene.map != nullptr && !scene.map->contours.empty()) {
        c += collision_cost(fk, robot.chain, cost_spec, *scene.map, scene.weights.alpha_c);
      }
      c += scene.weights.alpha_lim * within_limits(x, u, robot.limits).violation;
      costs.per_step(i, k) = c;
    }
  }
  finalize_costs(costs, cfg.gamma, cfg.beta_temp);
  return costs;
}

PolicyParams update_policy(const PolicyParams& p, const Eigen::MatrixXd& controls,
                           const RolloutCosts& costs, const MppiConfig& cfg) {
  const int n = static_cast<int>(controls.cols());
  if (costs.weights.size() != n) throw std::invalid_argument("update_policy: weights size");
  const double wsum = costs.weights.sum();
  if (!(wsum > 0.0)) throw std::invalid_argument("update_policy: degenerate weights");

  PolicyParams out = p;
  const Eigen::VectorXd weighted_mean = (controls * costs.weights) / wsum;
  out.mean = (1.0 - cfg.alpha_mu) * p.mean + cfg.alpha_mu * weighted_mean;

  Eigen::VectorXd weighted_var = Eigen::VectorXd::Zero(p.mean.size());
  for (int i = 0; i < n; ++i) {
    weighted_var +=
        costs.weights(i) * (controls.col(i) - out.mean).array().square().matrix();
  }
  weighted_var /= wsum;
  out.cov_diag = ((1.0 - cfg.alpha_sigma) * p.cov_diag + cfg.alpha_sigma * weighted_var)
                     .cwiseMax(cfg.cov_floor);
  return out;
}

PolicyParams shift_policy(const PolicyParams& p, const Eigen::VectorXd& default_u,
                          const Eigen::VectorXd& default_cov, const MppiConfig& cfg) {
  const int cd = static_cast<int>(default_u.size());
  const int h = static_cast<int>(p.mean.size()) / cd;
  PolicyParams out = p;
  if (h > 1) {
    out.mean.head((h - 1) * cd) = p.mean.tail((h - 1) * cd);
    out.cov_diag.head((h - 1) * cd) = p.cov_diag.tail((h - 1) * cd);
  }
  out.mean.tail(cd) = default_u;
  out.cov_diag.tail(cd) = default_cov.cwiseMax(cfg.cov_floor);
  return out;
}

Eigen::VectorXd select_command(const PolicyParams& p, const Limits& lim) {
  const int cd = static_cast<int>(lim.u_max.size());
  return p.mean.head(cd).cwiseMin(lim.u_max).cwiseMax(-lim.u_max);
}

}  // namespace riskplan
