#include "riskplan/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "riskplan/rng.hpp"

namespace riskplan {

namespace {

// Orthonormal frame with x along the given direction; the remaining axes are
// picked deterministically from the least-aligned world axis.
Eigen::Matrix3d frame_along(const Eigen::Vector3d& direction) {
  Eigen::Vector3d x = direction;
  const double norm = x.norm();
  if (norm < 1e-12) return Eigen::Matrix3d::Identity();
  x /= norm;
  Eigen::Vector3d ref = Eigen::Vector3d::UnitX();
  if (std::abs(x.x()) >= std::abs(x.y()) && std::abs(x.x()) >= std::abs(x.z())) {
    ref = std::abs(x.y()) <= std::abs(x.z()) ? Eigen::Vector3d::UnitY()
                                             : Eigen::Vector3d::UnitZ();
  } else if (std::abs(x.y()) >= std::abs(x.z())) {
    ref = std::abs(x.x()) <= std::abs(x.z()) ? Eigen::Vector3d::UnitX()
                                             : Eigen::Vector3d::UnitZ();
  }
  Eigen::Vector3d z = x.cross(ref).normalized();
  Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

Eigen::Vector3d frame_origin(const FkResult& fk, int frame_index, int n_q) {
  if (frame_index == n_q) return fk.ee_frame.translation();
  return fk.frames[frame_index].translation();
}

Eigen::Matrix3d base_shape(double length, double radius, double margin) {
  const double sx = 0.5 * length + margin;
  const double sy = radius + margin;
  Eigen::Matrix3d q = Eigen::Matrix3d::Zero();
  q(0, 0) = 1.0 / (sx * sx);
  q(1, 1) = 1.0 / (sy * sy);
  q(2, 2) = 1.0 / (sy * sy);
  return q;
}

}  // namespace

void KinematicChain::validate() const {
  if (n_q() < 2) throw std::invalid_argument("KinematicChain: needs at least 2 joints");
  for (const auto& j : joints) {
    if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
      throw std::invalid_argument("KinematicChain: joint axis not unit-norm");
    }
  }
}

double KinematicChain::distal_length(int joint_index) const {
  double total = 0.0;
  for (int k = joint_index + 1; k < n_q(); ++k) {
    total += joints[k].parent_transform.translation().norm();
  }
  total += ee_offset.translation().norm();
  return total;
}

JointState JointState::zero(int n_q) {
  JointState x;
  x.q = Eigen::VectorXd::Zero(n_q);
  x.qdot = Eigen::VectorXd::Zero(n_q);
  return x;
}

void Limits::validate() const {
  if ((q_min.array() >= q_max.array()).any()) {
    throw std::invalid_argument("Limits: q_min must be < q_max componentwise");
  }
  if ((v_max.array() <= 0).any() || (u_max.array() <= 0).any()) {
    throw std::invalid_argument("Limits: v_max and u_max must be positive");
  }
}

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.n_q()) {
    throw std::invalid_argument("forward_kinematics: configuration size mismatch");
  }
  FkResult out;
  out.frames.resize(chain.n_q());
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  for (int j = 0; j < chain.n_q(); ++j) {
    pose = pose * chain.joints[j].parent_transform *
           Eigen::AngleAxisd(q(j), chain.joints[j].axis);
    out.frames[j] = pose;
  }
  out.ee_frame = pose * chain.ee_offset;
  out.ee = out.ee_frame.translation();
  return out;
}

LimitCheck within_limits(const JointState& x, const Eigen::VectorXd& u, const Limits& lim) {
  LimitCheck out;
  auto account = [&out](double value, double bound_lo, double bound_hi) {
    if (value > bound_hi) out.violation += value - bound_hi;
    if (value < bound_lo) out.violation += bound_lo - value;
  };
  for (int i = 0; i < x.q.size(); ++i) {
    account(x.q(i), lim.q_min(i), lim.q_max(i));
    account(x.qdot(i), -lim.v_max(i), lim.v_max(i));
  }
  for (int i = 0; i < u.size(); ++i) account(u(i), -lim.u_max(i), lim.u_max(i));
  out.ok = out.violation == 0.0;
  return out;
}

void LinkEllipsoidSpec::validate(const KinematicChain& chain) const {
  if (links.empty()) throw std::invalid_argument("LinkEllipsoidSpec: no links");
  if (inflation < 1.0) throw std::invalid_argument("LinkEllipsoidSpec: inflation < 1");
  if (points_per_link < 1) throw std::invalid_argument("LinkEllipsoidSpec: needs points");
  for (const auto& l : links) {
    if (l.anchor_a < 0 || l.anchor_b > chain.n_q() || l.anchor_a >= l.anchor_b) {
      throw std::invalid_argument("LinkEllipsoidSpec: bad anchor pair");
    }
    if (l.capsule_radius <= 0.0) {
      throw std::invalid_argument("LinkEllipsoidSpec: capsule radius must be positive");
    }
  }
}

LinkEllipsoidSpec LinkEllipsoidSpec::consecutive(const KinematicChain& chain,
                                                 double capsule_radius) {
  LinkEllipsoidSpec spec;
  for (int j = 0; j + 1 < chain.n_q(); ++j) {
    spec.links.push_back({j, j + 1, capsule_radius});
  }
  return spec;
}

std::vector<EllipsoidRegion> link_ellipsoids(const KinematicChain& chain,
                                             const LinkEllipsoidSpec& spec,
                                             const Eigen::VectorXd& q) {
  spec.validate(chain);
  const FkResult fk = forward_kinematics(chain, q);
  std::vector<EllipsoidRegion> out;
  out.reserve(spec.links.size());
  for (std::size_t i = 0; i < spec.links.size(); ++i) {
    const auto& link = spec.links[i];
    const Eigen::Vector3d a = frame_origin(fk, link.anchor_a, chain.n_q());
    const Eigen::Vector3d b = frame_origin(fk, link.anchor_b, chain.n_q());
    const double length = (b - a).norm();
    const Eigen::Matrix3d r = frame_along(b - a);
    const Eigen::Matrix3d q_local =
        base_shape(length, link.capsule_radius, spec.margin) / (spec.inflation * spec.inflation);

    EllipsoidRegion e;
    e.center = 0.5 * (a + b);
    Eigen::Matrix3d shape = r * q_local * r.transpose();
    e.shape = 0.5 * (shape + shape.transpose());  // keep exactly symmetric
    e.label = "link" + std::to_string(i);
    out.push_back(e);
  }
  return out;
}

std::vector<std::vector<Eigen::Vector3d>> link_occupancy(const KinematicChain& chain,
                                                         const LinkEllipsoidSpec& spec,
                                                         const Eigen::VectorXd& q) {
  spec.validate(chain);
  const FkResult fk = forward_kinematics(chain, q);
  std::vector<std::vector<Eigen::Vector3d>> out(spec.links.size());
  for (auto& link : out) link.reserve(spec.points_per_link);
  for_each_surface_point(chain, spec, fk,
                         [&](std::size_t l, const Eigen::Vector3d& p) { out[l].push_back(p); });
  return out;
}

namespace {

// Smallest inflation containing all surface points of one perturbed draw.
double required_inflation(const KinematicChain& chain, const LinkEllipsoidSpec& spec,
                          const Eigen::VectorXd& q_nominal, const Eigen::VectorXd& q_actual) {
  LinkEllipsoidSpec unit = spec;
  unit.inflation = 1.0;
  const auto ellipsoids = link_ellipsoids(chain, unit, q_nominal);
  const auto occupancy = link_occupancy(chain, unit, q_actual);
  double worst = 0.0;
  for (std::size_t l = 0; l < ellipsoids.size(); ++l) {
    for (const auto& p : occupancy[l]) {
      const Eigen::Vector3d d = p - ellipsoids[l].center;
      worst = std::max(worst, d.dot(ellipsoids[l].shape * d));
    }
  }
  return std::sqrt(worst);
}

}  // namespace

LinkEllipsoidSpec calibrate_ellipsoids(const KinematicChain& chain,
                                       const LinkEllipsoidSpec& spec, const Limits& lim,
                                       const std::vector<ScalarDistribution>& pred_error,
                                       double delta_ell, int n_mc, std::uint64_t seed) {
  if (!(delta_ell > 0.0 && delta_ell < 1.0)) {
    throw std::invalid_argument("calibrate_ellipsoids: delta_ell outside (0, 1)");
  }
  if (n_mc < 1000) throw std::invalid_argument("calibrate_ellipsoids: n_mc < 1000");
  if (static_cast<int>(pred_error.size()) != chain.n_q()) {
    throw std::invalid_argument("calibrate_ellipsoids: one error distribution per joint");
  }

  Rng rng(seed);
  std::vector<double> required(n_mc);
  Eigen::VectorXd q(chain.n_q()), err(chain.n_q());
  for (int i = 0; i < n_mc; ++i) {
    for (int j = 0; j < chain.n_q(); ++j) {
      q(j) = rng.uniform(lim.q_min(j), lim.q_max(j));
      err(j) = pred_error[j].sample(rng);
    }
    required[i] = required_inflation(chain, spec, q, q + err);
  }

  // The smallest feasible inflation is the (1 - delta_ell) quantile of the
  // per-draw requirements; snap up to the 1e-3 grid a bisection would use.
  std::sort(required.begin(), required.end());
  const int rank = std::min<int>(
      n_mc - 1, static_cast<int>(std::ceil((1.0 - delta_ell) * n_mc)) - 1);
  const double quantile = required[std::max(rank, 0)];
  double inflation = std::max(1.0, std::ceil(quantile * 1000.0) / 1000.0);
  if (inflation > spec.inflation_cap) {
    throw std::runtime_error("calibrate_ellipsoids: required inflation " +
                             std::to_string(inflation) + " exceeds cap " +
                             std::to_string(spec.inflation_cap));
  }
  LinkEllipsoidSpec out = spec;
  out.inflation = inflation;
  return out;
}

double containment_frequency(const KinematicChain& chain, const LinkEllipsoidSpec& spec,
                             const Limits& lim,
                             const std::vector<ScalarDistribution>& pred_error, int n_mc,
                             std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd q(chain.n_q()), err(chain.n_q());
  int contained = 0;
  for (int i = 0; i < n_mc; ++i) {
    for (int j = 0; j < chain.n_q(); ++j) {
      q(j) = rng.uniform(lim.q_min(j), lim.q_max(j));
      err(j) = pred_error[j].sample(rng);
    }
    if (required_inflation(chain, spec, q, q + err) <= spec.inflation) ++contained;
  }
  return static_cast<double>(contained) / n_mc;
}

}  // namespace riskplan
