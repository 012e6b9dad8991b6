#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "riskplan/polynomial.hpp"
#include "riskplan/risk_contour.hpp"
#include "riskplan/sdp.hpp"

namespace riskplan {

// Closed ellipsoid {p : (p - center)^T shape (p - center) <= 1}.
struct EllipsoidRegion {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d shape = Eigen::Matrix3d::Identity();
  std::string label;

  // Throws unless shape is symmetric (1e-12) and positive definite.
  void validate() const;
};

struct GramMatrix {
  std::vector<Polynomial::Exponents> basis;
  Eigen::MatrixXd entries;

  // Sum-of-squares polynomial m(v)^T G m(v) over the given variables.
  Polynomial to_polynomial(const std::vector<std::string>& variables) const;
};

// One nonnegativity identity over the ellipsoid:
//   target = sigma_free + sigma_domain * domain, both sigmas SOS.
// Posed in ellipsoid-local coordinates stretched by var_scale, chosen to
// balance the target's coefficient magnitudes across monomial degrees.
struct SosCondition {
  Polynomial target;  // coefficients scaled to unit max-norm
  double target_scale = 1.0;
  Polynomial domain;  // 1 - var_scale^2 |v|^2, scaled to unit max-norm
  double domain_scale = 1.0;
  double var_scale = 1.0;
  std::vector<Polynomial::Exponents> basis_free;
  std::vector<Polynomial::Exponents> basis_domain;
  int sigma_free_degree = 0;
  int sigma_domain_degree = 0;
};

// Feasibility encoding of the per-step safety certificate for one
// (risk contour, link ellipsoid) pair: the variance-ratio condition on
// P2^2 - (1-delta) P1 and the mean-sign condition on P2, both restricted to
// the ellipsoid in shifted coordinates.
struct SosProblem {
  SosCondition risk_condition;  // g1 = P2^2 - (1-delta) P1, shifted
  SosCondition mean_condition;  // g2 = P2, shifted
};

struct CertResult {
  enum class Verdict { Certified, NotCertified, SolverFailure };

  Verdict verdict = Verdict::SolverFailure;
  double margin = 0.0;    // feasibility margin (scaled units), min over conditions
  double residual = 0.0;  // max coefficient mismatch of the reconstructed identity
  std::vector<GramMatrix> gram;  // free/domain multipliers per condition when solved
  std::string detail;            // contour name or failure note

  bool certified() const { return verdict == Verdict::Certified; }
};

struct SosOptions {
  double tol_eq = 1e-7;
  double tol_psd = 1e-8;
  int max_iterations = 200;
  int max_contour_degree = 6;  // max position degree of the source obstacle
  double margin_cap = 1.0;     // upper bound on the maximized margin
};

// Builds both SOS conditions for the contour restricted to the ellipsoid.
// Throws if the contour degree exceeds options.max_contour_degree.
SosProblem build_certificate_problem(const RiskContour& contour, const EllipsoidRegion& e,
                                     const SosOptions& options = {});

// Margin-form semidefinite feasibility solve of one SosProblem.
CertResult sdp_feasibility_solve(const SosProblem& problem, const SosOptions& options = {});

// Conjunction over every contour in the map; the first non-certified contour
// short-circuits with its verdict.
CertResult certify_ellipsoid(const RiskContourMap& map, const EllipsoidRegion& e,
                             const SosOptions& options = {});

// Cheap sampling pre-filter: quasi-uniform interior points, first point
// violating contour membership is returned as a counterexample. Returning
// nothing proves nothing.
std::optional<Eigen::Vector3d> sample_falsify(const RiskContourMap& map,
                                              const EllipsoidRegion& e, int n,
                                              std::uint64_t seed);

// Max coefficient mismatch of target - (sigma_free + sigma_domain * domain)
// with the multipliers reconstructed from Gram matrices (scaled units).
double reconstruct_identity_residual(const SosCondition& condition,
                                     const GramMatrix& gram_free,
                                     const GramMatrix& gram_domain);

// Monomial exponent tuples of the given variable count with total degree <= d,
// graded lexicographic order.
std::vector<Polynomial::Exponents> monomials_up_to_degree(int num_variables, int degree);

}  // namespace riskplan
