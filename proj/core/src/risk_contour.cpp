#include "riskplan/risk_contour.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskplan {

namespace {
// Denominator guard for the variance ratio when P1 -> 0 (deterministic
// obstacle evaluated at its own boundary).
constexpr double kVarianceRatioGuard = 1e-12;

// Replaces w^k with moments[k] and drops the random variable.
Polynomial substitute_moments(const Polynomial& p, int omega_index,
                              const std::vector<double>& moments) {
  Polynomial out(p.variables());
  Polynomial::Exponents reduced;
  for (const auto& [exps, c] : p.terms()) {
    reduced = exps;
    const int k = reduced[omega_index];
    reduced[omega_index] = 0;
    out.add_term(reduced, c * moments[k]);
  }
  return out.drop_variable(omega_index);
}
}  // namespace

CompiledPoly3::CompiledPoly3(const Polynomial& p) {
  if (p.num_variables() != 3) {
    throw std::invalid_argument("CompiledPoly3: expected a trivariate polynomial");
  }
  terms_.reserve(p.num_terms());
  for (const auto& [exps, c] : p.terms()) {
    terms_.push_back({exps[0], exps[1], exps[2], c});
    max_degree_ = std::max({max_degree_, exps[0], exps[1], exps[2]});
  }
}

double CompiledPoly3::eval(double x, double y, double z) const {
  double px[16], py[16], pz[16];
  px[0] = py[0] = pz[0] = 1.0;
  for (int k = 1; k <= max_degree_; ++k) {
    px[k] = px[k - 1] * x;
    py[k] = py[k - 1] * y;
    pz[k] = pz[k - 1] * z;
  }
  double sum = 0.0;
  for (const auto& t : terms_) sum += t.c * px[t.ex] * py[t.ey] * pz[t.ez];
  return sum;
}

void RiskContour::compile() {
  fast_p1 = std::make_shared<const CompiledPoly3>(p1);
  fast_p2 = std::make_shared<const CompiledPoly3>(p2);
}

double RiskContour::eval_p1(const Eigen::Vector3d& pt) const {
  if (fast_p1) return fast_p1->eval(pt.x(), pt.y(), pt.z());
  const double values[3] = {pt.x(), pt.y(), pt.z()};
  return p1.eval(std::span<const double>(values, 3));
}

double RiskContour::eval_p2(const Eigen::Vector3d& pt) const {
  if (fast_p2) return fast_p2->eval(pt.x(), pt.y(), pt.z());
  const double values[3] = {pt.x(), pt.y(), pt.z()};
  return p2.eval(std::span<const double>(values, 3));
}

UncertainObstacle UncertainObstacle::make(Polynomial poly, ScalarDistribution omega,
                                          std::string name, const std::string& omega_var) {
  UncertainObstacle ob;
  ob.omega_index = poly.variable_index(omega_var);
  ob.poly = std::move(poly);
  ob.omega = omega;
  ob.name = std::move(name);
  return ob;
}

int UncertainObstacle::max_moment_order() const {
  if (omega_index < 0) return 0;
  return 2 * poly.degree_in(omega_index);
}

int UncertainObstacle::position_degree() const {
  int deg = 0;
  for (const auto& [exps, c] : poly.terms()) {
    int d = 0;
    for (int i = 0; i < poly.num_variables(); ++i) {
      if (i != omega_index) d += exps[i];
    }
    deg = std::max(deg, d);
  }
  return deg;
}

RiskContour contour_from_obstacle(const UncertainObstacle& ob, double delta) {
  if (delta < 0.0 || delta > 1.0) {
    throw std::invalid_argument("contour_from_obstacle: delta outside [0, 1]");
  }
  RiskContour c;
  c.delta = delta;
  c.source = ob.name;

  const Polynomial squared = ob.poly.squared();
  if (ob.omega_index < 0) {
    c.p2 = ob.poly;
    c.p1 = squared;
    c.compile();
    return c;
  }

  const int order = ob.max_moment_order();
  std::vector<double> moments(order + 1);
  for (int k = 0; k <= order; ++k) moments[k] = ob.omega.raw_moment(k);

  c.p2 = substitute_moments(ob.poly, ob.omega_index, moments);
  c.p1 = substitute_moments(squared, ob.omega_index, moments);
  c.compile();
  return c;
}

Membership contour_membership(const RiskContour& c, const Eigen::Vector3d& pt) {
  const double v1 = c.eval_p1(pt);
  const double v2 = c.eval_p2(pt);

  Membership m;
  if (v2 < 0.0) {
    m.safe = false;
    m.risk_bound = 1.0;
    return m;
  }
  const double variance = v1 - v2 * v2;  // Var[o(pt, w)], >= 0 up to roundoff
  double bound = variance / std::max(v1, kVarianceRatioGuard);
  bound = std::clamp(bound, 0.0, 1.0);
  m.risk_bound = bound;
  m.safe = bound <= c.delta;
  return m;
}

double map_risk(const RiskContourMap& m, const Eigen::Vector3d& pt) {
  double worst = 0.0;
  for (const auto& c : m.contours) {
    worst = std::max(worst, contour_membership(c, pt).risk_bound);
  }
  return worst;
}

bool map_safe(const RiskContourMap& m, const Eigen::Vector3d& pt) {
  for (const auto& c : m.contours) {
    if (!contour_membership(c, pt).safe) return false;
  }
  return true;
}

RiskContourMap build_contour_map(const std::vector<UncertainObstacle>& obstacles, double delta,
                                 const Eigen::Vector3d& bounds_lo,
                                 const Eigen::Vector3d& bounds_hi) {
  RiskContourMap m;
  m.bounds_lo = bounds_lo;
  m.bounds_hi = bounds_hi;
  m.contours.reserve(obstacles.size());
  for (const auto& ob : obstacles) {
    m.contours.push_back(contour_from_obstacle(ob, delta));
  }
  return m;
}

}  // namespace riskplan
