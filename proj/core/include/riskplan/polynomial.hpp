#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace riskplan {

// Sparse multivariate polynomial with double coefficients over an ordered
// list of named variables. Terms map exponent tuples (one entry per variable)
// to coefficients; zero coefficients are never stored.
class Polynomial {
 public:
  using Exponents = std::vector<int>;
  using TermMap = std::map<Exponents, double>;

  Polynomial() = default;
  explicit Polynomial(std::vector<std::string> variables);
  static Polynomial constant(double value, std::vector<std::string> variables = {});

  const std::vector<std::string>& variables() const { return variables_; }
  int num_variables() const { return static_cast<int>(variables_.size()); }
  // Index of a named variable, -1 if absent.
  int variable_index(const std::string& name) const;

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t num_terms() const { return terms_.size(); }

  // Accumulates coeff onto the monomial with the given exponents.
  void add_term(const Exponents& exponents, double coeff);
  double coeff(const Exponents& exponents) const;

  Polynomial operator+(const Polynomial& other) const;
  Polynomial operator-(const Polynomial& other) const;
  Polynomial operator*(const Polynomial& other) const;
  Polynomial scaled(double factor) const;
  Polynomial squared() const { return *this * *this; }

  int total_degree() const;
  int degree_in(int variable) const;
  double max_abs_coeff() const;

  // Evaluation with all variables bound by position.
  double eval(std::span<const double> values) const;
  // Evaluation from a named assignment; throws naming any unbound variable.
  double eval(const std::map<std::string, double>& assignment) const;

  // Binds one variable to a constant; the variable stays in the list with
  // exponent zero folded into the remaining terms.
  Polynomial substitute(int variable, double value) const;
  // Replaces variable v with (offset + scale * v), e.g. for recentering an
  // obstacle in the workspace or shifting into ellipsoid-local coordinates.
  Polynomial substitute_affine(int variable, double offset, double scale) const;
  // Drops a variable no term depends on; throws otherwise.
  Polynomial drop_variable(int variable) const;

  std::string to_string() const;

 private:
  void check_same_variables(const Polynomial& other) const;

  std::vector<std::string> variables_;
  TermMap terms_;
};

}  // namespace riskplan
