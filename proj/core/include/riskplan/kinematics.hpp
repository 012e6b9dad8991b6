#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "riskplan/distribution.hpp"
#include "riskplan/sos_certifier.hpp"

namespace riskplan {

// Revolute joint: fixed transform from the parent frame, then rotation of q
// radians about a unit axis through the frame origin.
struct Joint {
  Eigen::Isometry3d parent_transform = Eigen::Isometry3d::Identity();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
};

struct KinematicChain {
  std::vector<Joint> joints;
  Eigen::Isometry3d ee_offset = Eigen::Isometry3d::Identity();

  int n_q() const { return static_cast<int>(joints.size()); }
  // Throws unless n_q >= 2 and all axes are unit-norm to 1e-9.
  void validate() const;
  // Sum of fixed link lengths distal to the given joint (for Lipschitz
  // bounds on the end-effector).
  double distal_length(int joint_index) const;
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qdot;

  static JointState zero(int n_q);
};

struct Limits {
  Eigen::VectorXd q_min, q_max, v_max, u_max;

  void validate() const;
};

struct LimitCheck {
  bool ok = true;
  double violation = 0.0;  // sum of positive exceedances
};

struct FkResult {
  std::vector<Eigen::Isometry3d> frames;  // one per joint, world pose
  Eigen::Isometry3d ee_frame = Eigen::Isometry3d::Identity();
  Eigen::Vector3d ee = Eigen::Vector3d::Zero();
};

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

LimitCheck within_limits(const JointState& x, const Eigen::VectorXd& u, const Limits& lim);

// One body segment between two chain frames (frame index n_q refers to the
// end-effector frame); approximated by a capsule for occupancy and enclosed
// by an ellipsoid for certification.
struct LinkSpec {
  int anchor_a = 0;
  int anchor_b = 1;
  double capsule_radius = 0.04;
};

struct LinkEllipsoidSpec {
  std::vector<LinkSpec> links;
  double margin = 0.02;           // added to the base semi-axes
  double inflation = 1.0;         // calibrated scale >= 1
  int points_per_link = 32;       // capsule surface samples
  double inflation_cap = 10.0;

  void validate(const KinematicChain& chain) const;
  // Default spec: one link per consecutive joint pair (n_q - 1 links).
  static LinkEllipsoidSpec consecutive(const KinematicChain& chain, double capsule_radius);
};

// Ellipsoids centered at anchor midpoints, base semi-axes
// (length/2 + margin, radius + margin, radius + margin) in the link frame,
// scaled down by inflation^2 in the quadratic form (i.e. semi-axes scaled up
// by inflation), rotated into the world frame.
std::vector<EllipsoidRegion> link_ellipsoids(const KinematicChain& chain,
                                             const LinkEllipsoidSpec& spec,
                                             const Eigen::VectorXd& q);

// Capsule surface samples per link at the given configuration.
std::vector<std::vector<Eigen::Vector3d>> link_occupancy(const KinematicChain& chain,
                                                         const LinkEllipsoidSpec& spec,
                                                         const Eigen::VectorXd& q);

// Allocation-free traversal of the same surface samples given a precomputed
// FK result; fn(link_index, point) is called for every sample.
template <typename Fn>
void for_each_surface_point(const KinematicChain& chain, const LinkEllipsoidSpec& spec,
                            const FkResult& fk, Fn&& fn) {
  constexpr double kGoldenAngle = 2.399963229728653;
  const int n_q = chain.n_q();
  for (std::size_t l = 0; l < spec.links.size(); ++l) {
    const auto& link = spec.links[l];
    const Eigen::Vector3d a = link.anchor_a == n_q ? fk.ee_frame.translation()
                                                   : fk.frames[link.anchor_a].translation();
    const Eigen::Vector3d b = link.anchor_b == n_q ? fk.ee_frame.translation()
                                                   : fk.frames[link.anchor_b].translation();
    const Eigen::Vector3d d = b - a;
    const double length = d.norm();
    const Eigen::Vector3d axis = length > 1e-12 ? (d / length).eval() : Eigen::Vector3d::UnitX();
    Eigen::Vector3d ortho1 = axis.cross(Eigen::Vector3d::UnitZ());
    if (ortho1.squaredNorm() < 1e-8) ortho1 = axis.cross(Eigen::Vector3d::UnitY());
    ortho1.normalize();
    const Eigen::Vector3d ortho2 = axis.cross(ortho1);
    const double radius = link.capsule_radius;
    for (int i = 0; i < spec.points_per_link; ++i) {
      const double u = (i + 0.5) / spec.points_per_link;
      const double axial = u * (length + 2.0 * radius) - radius;
      const double clamped = std::clamp(axial, 0.0, length);
      const double cap_offset = axial - clamped;
      const double ring =
          std::sqrt(std::max(0.0, radius * radius - cap_offset * cap_offset));
      const double angle = i * kGoldenAngle;
      fn(l, Eigen::Vector3d(a + (clamped + cap_offset) * axis +
                            (ring * std::cos(angle)) * ortho1 +
                            (ring * std::sin(angle)) * ortho2));
    }
  }
}

// Smallest inflation (1e-3 resolution) so that over n_mc Monte-Carlo draws of
// per-joint prediction error at random in-limit configurations, the fraction
// of draws with every surface point inside its link ellipsoid is at least
// 1 - delta_ell. Throws if the cap is exceeded.
LinkEllipsoidSpec calibrate_ellipsoids(const KinematicChain& chain,
                                       const LinkEllipsoidSpec& spec, const Limits& lim,
                                       const std::vector<ScalarDistribution>& pred_error,
                                       double delta_ell, int n_mc, std::uint64_t seed);

// Fraction of fresh draws with all surface points contained (validation
// counterpart of calibrate_ellipsoids).
double containment_frequency(const KinematicChain& chain, const LinkEllipsoidSpec& spec,
                             const Limits& lim,
                             const std::vector<ScalarDistribution>& pred_error, int n_mc,
                             std::uint64_t seed);

struct RobotModel {
  std::string name;
  KinematicChain chain;
  Limits limits;
  LinkEllipsoidSpec ellipsoids;
};

}  // namespace riskplan
