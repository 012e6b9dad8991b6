#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "riskplan/distribution.hpp"
#include "riskplan/polynomial.hpp"

namespace riskplan {

// Obstacle interior {p : poly(p, w) <= 0} where w is a scalar random
// variable. poly is defined over (x, y, z) plus optionally one random
// variable; omega_index == -1 means the obstacle is deterministic.
struct UncertainObstacle {
  Polynomial poly;
  ScalarDistribution omega;
  std::string name;
  int omega_index = -1;

  static UncertainObstacle make(Polynomial poly, ScalarDistribution omega,
                                std::string name, const std::string& omega_var = "omega");

  // Largest moment order needed for the squared polynomial.
  int max_moment_order() const;
  int position_degree() const;
};

// Flat-array evaluator for a trivariate polynomial; the generic sparse-map
// representation is too slow for the rollout-cost inner loops.
class CompiledPoly3 {
 public:
  CompiledPoly3() = default;
  explicit CompiledPoly3(const Polynomial& p);
  double eval(double x, double y, double z) const;

 private:
  struct Term {
    int ex, ey, ez;
    double c;
  };
  std::vector<Term> terms_;
  int max_degree_ = 0;
};

// Moment-based inner approximation of the delta-safe set of one obstacle:
// p1 = E[o^2], p2 = E[o], both position-only polynomials in (x, y, z).
struct RiskContour {
  Polynomial p1;
  Polynomial p2;
  double delta = 0.0;
  std::string source;

  // Shared immutable fast evaluators; built by contour_from_obstacle,
  // optional for hand-assembled contours.
  std::shared_ptr<const CompiledPoly3> fast_p1;
  std::shared_ptr<const CompiledPoly3> fast_p2;

  void compile();
  double eval_p1(const Eigen::Vector3d& pt) const;
  double eval_p2(const Eigen::Vector3d& pt) const;
};

struct RiskContourMap {
  std::vector<RiskContour> contours;
  Eigen::Vector3d bounds_lo = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d bounds_hi = Eigen::Vector3d::Constant(1.0);
};

struct Membership {
  bool safe = false;
  double risk_bound = 1.0;
};

// Replaces w^k by E[w^k] in p2 = E[o] and in the symbolic square for
// p1 = E[o^2], then collects position monomials.
RiskContour contour_from_obstacle(const UncertainObstacle& ob, double delta);

// One-sided (Cantelli) collision bound at a point. Safe requires the mean
// polynomial nonnegative and the variance ratio within delta.
Membership contour_membership(const RiskContour& c, const Eigen::Vector3d& pt);

// Max risk bound over all contours; 0 for an empty map.
double map_risk(const RiskContourMap& m, const Eigen::Vector3d& pt);
bool map_safe(const RiskContourMap& m, const Eigen::Vector3d& pt);

RiskContourMap build_contour_map(const std::vector<UncertainObstacle>& obstacles, double delta,
                                 const Eigen::Vector3d& bounds_lo,
                                 const Eigen::Vector3d& bounds_hi);

}  // namespace riskplan
