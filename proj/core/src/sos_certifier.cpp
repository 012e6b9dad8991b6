#include "riskplan/sos_certifier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

#include "riskplan/lowdisc.hpp"
#include "riskplan/rng.hpp"

namespace riskplan {

namespace {

const std::vector<std::string> kShiftedVars = {"px", "py", "pz"};

int ceil_div2(int x) { return (x + 1) / 2; }

// p(center + basis * v) expanded over the shifted variables. Normalizing the
// ellipsoid to the unit ball keeps the feasibility problem well conditioned
// for long, thin, or strongly rotated link ellipsoids.
Polynomial compose_affine(const Polynomial& p, const Eigen::Vector3d& center,
                          const Eigen::Matrix3d& basis) {
  std::array<Polynomial, 3> linear;
  for (int i = 0; i < 3; ++i) {
    Polynomial l(kShiftedVars);
    l.add_term({0, 0, 0}, center(i));
    for (int j = 0; j < 3; ++j) {
      Polynomial::Exponents e(3, 0);
      e[j] = 1;
      l.add_term(e, basis(i, j));
    }
    linear[i] = std::move(l);
  }
  std::array<std::vector<Polynomial>, 3> powers;
  for (int i = 0; i < 3; ++i) {
    powers[i].push_back(Polynomial::constant(1.0, kShiftedVars));
    for (int k = 1; k <= p.degree_in(i); ++k) {
      powers[i].push_back(powers[i].back() * linear[i]);
    }
  }
  Polynomial out(kShiftedVars);
  for (const auto& [exps, c] : p.terms()) {
    Polynomial term = powers[0][exps[0]] * powers[1][exps[1]];
    term = term * powers[2][exps[2]];
    out = out + term.scaled(c);
  }
  return out;
}

Polynomial ball_domain(double var_scale) {
  // 1 - |p|^2 <= ball of radius 1 in coordinates stretched by var_scale.
  Polynomial s(kShiftedVars);
  const double q = var_scale * var_scale;
  s.add_term({0, 0, 0}, 1.0);
  s.add_term({2, 0, 0}, -q);
  s.add_term({0, 2, 0}, -q);
  s.add_term({0, 0, 2}, -q);
  return s;
}

Polynomial stretch_variables(const Polynomial& p, double factor) {
  Polynomial out(p.variables());
  for (const auto& [exps, c] : p.terms()) {
    int total = 0;
    for (int e : exps) total += e;
    out.add_term(exps, c * std::pow(factor, total));
  }
  return out;
}

// Stretch factor that minimizes the spread of log coefficient magnitudes
// across total degrees (convex piecewise-linear in log space).
double balance_variable_scale(const Polynomial& p) {
  std::map<int, double> degree_max;
  for (const auto& [exps, c] : p.terms()) {
    int total = 0;
    for (int e : exps) total += e;
    degree_max[total] = std::max(degree_max[total], std::abs(c));
  }
  if (degree_max.size() < 2) return 1.0;
  auto spread = [&](double t) {
    double hi = -1e300, lo = 1e300;
    for (const auto& [k, a] : degree_max) {
      if (a <= 0.0) continue;
      const double v = std::log(a) + k * t;
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    return hi - lo;
  };
  double lo = -20.0, hi = 20.0;
  for (int it = 0; it < 120; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (spread(m1) <= spread(m2)) hi = m2;
    else lo = m1;
  }
  return std::exp(0.5 * (lo + hi));
}

SosCondition make_condition(const Polynomial& raw_target) {
  SosCondition cond;
  cond.var_scale = balance_variable_scale(raw_target);
  Polynomial target = stretch_variables(raw_target, cond.var_scale);
  Polynomial domain = ball_domain(cond.var_scale);
  cond.target_scale = std::max(target.max_abs_coeff(), 1e-300);
  cond.target = target.scaled(1.0 / cond.target_scale);
  cond.domain_scale = std::max(domain.max_abs_coeff(), 1e-300);
  cond.domain = domain.scaled(1.0 / cond.domain_scale);
  const int target_degree = std::max(cond.target.total_degree(), 0);
  const int half_free = std::max(ceil_div2(target_degree), 0);
  cond.sigma_free_degree = 2 * half_free;
  const int half_domain =
      std::max(ceil_div2(target_degree - cond.domain.total_degree()), 0);
  cond.sigma_domain_degree = 2 * half_domain;
  cond.basis_free = monomials_up_to_degree(3, half_free);
  cond.basis_domain = monomials_up_to_degree(3, half_domain);
  return cond;
}

// Index the monomials reachable by the Gram bases and the domain multiplier.
struct EqualityIndex {
  std::vector<Polynomial::Exponents> monomials;
  std::map<Polynomial::Exponents, int> index;
};

EqualityIndex equality_monomials(const SosCondition& cond) {
  const int deg = std::max(cond.sigma_free_degree,
                           cond.sigma_domain_degree + cond.domain.total_degree());
  EqualityIndex out;
  out.monomials = monomials_up_to_degree(3, deg);
  for (int i = 0; i < static_cast<int>(out.monomials.size()); ++i) {
    out.index[out.monomials[i]] = i;
  }
  return out;
}

// Margin-form SDP for one condition: blocks (G_free, G_dom, lam+, lam-, cap),
// maximize lam with G_k - lam*I >= 0 encoded through H_k = G_k - lam*I.
struct ConditionSdp {
  SdpProblem sdp;
  int n_free = 0;
  int n_dom = 0;
};

ConditionSdp build_condition_sdp(const SosCondition& cond, double margin_cap) {
  const Polynomial& domain = cond.domain;
  ConditionSdp out;
  const int n0 = static_cast<int>(cond.basis_free.size());
  const int n2 = static_cast<int>(cond.basis_domain.size());
  out.n_free = n0;
  out.n_dom = n2;
  out.sdp.block_sizes = {n0, n2, 1, 1, 1};  // G_free, G_dom, lam+, lam-, cap

  EqualityIndex eq = equality_monomials(cond);
  const int m = static_cast<int>(eq.monomials.size());
  out.sdp.constraints.assign(m + 1, {});
  out.sdp.b = Eigen::VectorXd::Zero(m + 1);

  Polynomial::Exponents sum(3);
  // Free Gram block: coefficient of m_u * m_v.
  for (int u = 0; u < n0; ++u) {
    for (int v = u; v < n0; ++v) {
      for (int i = 0; i < 3; ++i) sum[i] = cond.basis_free[u][i] + cond.basis_free[v][i];
      const int row = eq.index.at(sum);
      out.sdp.constraints[row].push_back({0, u, v, 1.0});
    }
  }
  // Domain Gram block: coefficient of m_u * m_v * s_w for each domain monomial.
  for (const auto& [s_exps, s_coeff] : domain.terms()) {
    for (int u = 0; u < n2; ++u) {
      for (int v = u; v < n2; ++v) {
        for (int i = 0; i < 3; ++i) {
          sum[i] = cond.basis_domain[u][i] + cond.basis_domain[v][i] + s_exps[i];
        }
        const int row = eq.index.at(sum);
        out.sdp.constraints[row].push_back({1, u, v, s_coeff});
      }
    }
  }
  // Margin contribution: G_k = H_k + lam*I adds lam * (poly of I_free) and
  // lam * (poly of I_dom) * s to the identity.
  Polynomial id_poly(kShiftedVars);
  for (int u = 0; u < n0; ++u) {
    Polynomial::Exponents e(3);
    for (int i = 0; i < 3; ++i) e[i] = 2 * cond.basis_free[u][i];
    id_poly.add_term(e, 1.0);
  }
  Polynomial id_dom(kShiftedVars);
  for (int u = 0; u < n2; ++u) {
    Polynomial::Exponents e(3);
    for (int i = 0; i < 3; ++i) e[i] = 2 * cond.basis_domain[u][i];
    id_dom.add_term(e, 1.0);
  }
  const Polynomial lam_poly = id_poly + id_dom * domain;
  for (const auto& [exps, coeff] : lam_poly.terms()) {
    const int row = eq.index.at(exps);
    out.sdp.constraints[row].push_back({2, 0, 0, coeff});
    out.sdp.constraints[row].push_back({3, 0, 0, -coeff});
  }
  // Right-hand side: target coefficients (zero beyond its support).
  for (const auto& [exps, coeff] : cond.target.terms()) {
    out.sdp.b(eq.index.at(exps)) = coeff;
  }
  // Cap: lam+ + slack = margin_cap keeps the optimal face bounded.
  out.sdp.constraints[m].push_back({2, 0, 0, 1.0});
  out.sdp.constraints[m].push_back({4, 0, 0, 1.0});
  out.sdp.b(m) = margin_cap;
  // Objective: maximize lam+ - lam-.
  out.sdp.objective.push_back({2, 0, 0, -1.0});
  out.sdp.objective.push_back({3, 0, 0, 1.0});
  return out;
}

struct ConditionResult {
  CertResult::Verdict verdict = CertResult::Verdict::SolverFailure;
  double margin = 0.0;
  double residual = 0.0;
  GramMatrix gram_free;
  GramMatrix gram_domain;
};

ConditionResult solve_condition(const SosCondition& cond, const SosOptions& options) {
  ConditionSdp built = build_condition_sdp(cond, options.margin_cap);

  SdpOptions sdp_opts;
  sdp_opts.max_iterations = options.max_iterations;
  SdpSolution sol = solve_sdp(built.sdp, sdp_opts);

  ConditionResult out;
  if (sol.status != SdpSolution::Status::Optimal) {
    out.verdict = CertResult::Verdict::SolverFailure;
    return out;
  }
  const double margin = sol.X[2](0, 0) - sol.X[3](0, 0);
  out.margin = margin;

  out.gram_free.basis = cond.basis_free;
  out.gram_free.entries =
      sol.X[0] + margin * Eigen::MatrixXd::Identity(built.n_free, built.n_free);
  out.gram_domain.basis = cond.basis_domain;
  out.gram_domain.entries =
      sol.X[1] + margin * Eigen::MatrixXd::Identity(built.n_dom, built.n_dom);
  out.residual = reconstruct_identity_residual(cond, out.gram_free, out.gram_domain);

  if (margin >= -options.tol_psd) {
    out.verdict = out.residual <= options.tol_eq ? CertResult::Verdict::Certified
                                                 : CertResult::Verdict::SolverFailure;
  } else {
    out.verdict = CertResult::Verdict::NotCertified;
  }
  return out;
}

}  // namespace

void EllipsoidRegion::validate() const {
  if ((shape - shape.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("EllipsoidRegion: shape matrix not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(shape, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("EllipsoidRegion: shape matrix not positive definite");
  }
}

Polynomial GramMatrix::to_polynomial(const std::vector<std::string>& variables) const {
  Polynomial out(variables);
  const int n = static_cast<int>(basis.size());
  Polynomial::Exponents sum(variables.size());
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = basis[u][i] + basis[v][i];
      out.add_term(sum, entries(u, v));
    }
  }
  return out;
}

std::vector<Polynomial::Exponents> monomials_up_to_degree(int num_variables, int degree) {
  std::vector<Polynomial::Exponents> out;
  Polynomial::Exponents current(num_variables, 0);
  // Graded enumeration: all tuples with sum d for d = 0..degree.
  for (int d = 0; d <= degree; ++d) {
    // Enumerate compositions of d into num_variables parts, lexicographic.
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
      if (pos == num_variables - 1) {
        current[pos] = remaining;
        out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[pos] = e;
        rec(pos + 1, remaining - e);
      }
    };
    rec(0, d);
  }
  return out;
}

SosProblem build_certificate_problem(const RiskContour& contour, const EllipsoidRegion& e,
                                     const SosOptions& options) {
  e.validate();
  const int contour_degree = contour.p2.total_degree();
  if (contour_degree > options.max_contour_degree) {
    throw std::invalid_argument("build_certificate_problem: contour degree " +
                                std::to_string(contour_degree) + " exceeds configured max " +
                                std::to_string(options.max_contour_degree));
  }

  // Map the ellipsoid to the unit ball: p = center + L^{-T} v with
  // shape = L L^T, so the domain polynomial is exactly 1 - |v|^2.
  const Eigen::LLT<Eigen::Matrix3d> llt(e.shape);
  const Eigen::Matrix3d basis = llt.matrixL().toDenseMatrix().inverse().transpose();
  // Contour polynomials come in (x, y, z); the composition renames them to
  // the ellipsoid-local variables.
  Polynomial p1c(kShiftedVars), p2c(kShiftedVars);
  for (const auto& [exps, c] : contour.p1.terms()) p1c.add_term(exps, c);
  for (const auto& [exps, c] : contour.p2.terms()) p2c.add_term(exps, c);
  const Polynomial p1s = compose_affine(p1c, e.center, basis);
  const Polynomial p2s = compose_affine(p2c, e.center, basis);

  SosProblem out;
  const Polynomial g1 = p2s.squared() - p1s.scaled(1.0 - contour.delta);
  out.risk_condition = make_condition(g1);
  out.mean_condition = make_condition(p2s);
  return out;
}

double reconstruct_identity_residual(const SosCondition& condition,
                                     const GramMatrix& gram_free,
                                     const GramMatrix& gram_domain) {
  const Polynomial reconstructed = gram_free.to_polynomial(kShiftedVars) +
                                   gram_domain.to_polynomial(kShiftedVars) * condition.domain;
  const Polynomial diff = reconstructed - condition.target;
  return diff.max_abs_coeff();
}

CertResult sdp_feasibility_solve(const SosProblem& problem, const SosOptions& options) {
  ConditionResult risk = solve_condition(problem.risk_condition, options);
  CertResult out;
  if (risk.verdict == CertResult::Verdict::SolverFailure) {
    out.verdict = CertResult::Verdict::SolverFailure;
    out.detail = "risk condition solve failed";
    return out;
  }
  ConditionResult mean = solve_condition(problem.mean_condition, options);
  if (mean.verdict == CertResult::Verdict::SolverFailure) {
    out.verdict = CertResult::Verdict::SolverFailure;
    out.detail = "mean condition solve failed";
    return out;
  }

  out.margin = std::min(risk.margin, mean.margin);
  out.residual = std::max(risk.residual, mean.residual);
  out.gram = {risk.gram_free, risk.gram_domain, mean.gram_free, mean.gram_domain};
  if (risk.verdict == CertResult::Verdict::Certified &&
      mean.verdict == CertResult::Verdict::Certified) {
    out.verdict = CertResult::Verdict::Certified;
  } else {
    out.verdict = CertResult::Verdict::NotCertified;
  }
  return out;
}

CertResult certify_ellipsoid(const RiskContourMap& map, const EllipsoidRegion& e,
                             const SosOptions& options) {
  CertResult out;
  out.verdict = CertResult::Verdict::Certified;
  out.margin = options.margin_cap;
  out.residual = 0.0;
  out.detail = "empty map";
  for (const auto& contour : map.contours) {
    SosProblem problem = build_certificate_problem(contour, e, options);
    CertResult result = sdp_feasibility_solve(problem, options);
    result.detail = contour.source;
    if (!result.certified()) return result;
    out.margin = std::min(out.margin, result.margin);
    out.residual = std::max(out.residual, result.residual);
    out.detail = contour.source;
  }
  return out;
}

std::optional<Eigen::Vector3d> sample_falsify(const RiskContourMap& map,
                                              const EllipsoidRegion& e, int n,
                                              std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_falsify: n must be >= 1");
  e.validate();
  Eigen::LLT<Eigen::Matrix3d> llt(e.shape);
  const Eigen::Matrix3d l_inv_t =
      llt.matrixL().toDenseMatrix().inverse().transpose();

  // Center first: penetrating ellipsoids usually fail right there.
  if (!map_safe(map, e.center)) return e.center;

  const std::uint64_t start = 1 + (mix_seed(seed, 0x5a17) % 8192);
  for (int i = 0; i < n; ++i) {
    const std::uint64_t idx = start + static_cast<std::uint64_t>(i);
    const double u1 = radical_inverse(idx, 2);
    const double u2 = radical_inverse(idx, 3);
    const double u3 = radical_inverse(idx, 5);
    const double r = std::cbrt(u1);
    const double cos_t = 1.0 - 2.0 * u2;
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = 2.0 * M_PI * u3;
    Eigen::Vector3d ball(r * sin_t * std::cos(phi), r * sin_t * std::sin(phi), r * cos_t);
    Eigen::Vector3d pt = e.center + l_inv_t * ball;
    if (!map_safe(map, pt)) return pt;
  }
  return std::nullopt;
}

}  // namespace riskplan
