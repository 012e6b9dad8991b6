#include "riskplan/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace riskplan {

namespace {
constexpr double kDropTolerance = 0.0;  // exact zeros only; keep tiny coefficients

double int_pow(double base, int exp) {
  double out = 1.0;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}
}  // namespace

Polynomial::Polynomial(std::vector<std::string> variables)
    : variables_(std::move(variables)) {}

Polynomial Polynomial::constant(double value, std::vector<std::string> variables) {
  Polynomial p(std::move(variables));
  p.add_term(Exponents(p.num_variables(), 0), value);
  return p;
}

int Polynomial::variable_index(const std::string& name) const {
  auto it = std::find(variables_.begin(), variables_.end(), name);
  return it == variables_.end() ? -1 : static_cast<int>(it - variables_.begin());
}

void Polynomial::add_term(const Exponents& exponents, double coeff) {
  if (exponents.size() != variables_.size()) {
    throw std::invalid_argument("Polynomial::add_term: exponent tuple length " +
                                std::to_string(exponents.size()) + " != variable count " +
                                std::to_string(variables_.size()));
  }
  for (int e : exponents) {
    if (e < 0) throw std::invalid_argument("Polynomial::add_term: negative exponent");
  }
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(exponents, coeff);
  if (!inserted) {
    it->second += coeff;
    if (std::abs(it->second) <= kDropTolerance) terms_.erase(it);
  }
}

double Polynomial::coeff(const Exponents& exponents) const {
  auto it = terms_.find(exponents);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::check_same_variables(const Polynomial& other) const {
  if (variables_ != other.variables_) {
    throw std::invalid_argument("Polynomial: operands defined over different variables");
  }
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  check_same_variables(other);
  Polynomial out = *this;
  for (const auto& [exps, c] : other.terms_) out.add_term(exps, c);
  return out;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
  check_same_variables(other);
  Polynomial out = *this;
  for (const auto& [exps, c] : other.terms_) out.add_term(exps, -c);
  return out;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
  check_same_variables(other);
  Polynomial out(variables_);
  Exponents sum(variables_.size());
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : other.terms_) {
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = ea[i] + eb[i];
      out.add_term(sum, ca * cb);
    }
  }
  return out;
}

Polynomial Polynomial::scaled(double factor) const {
  Polynomial out(variables_);
  if (factor == 0.0) return out;
  for (const auto& [exps, c] : terms_) out.terms_[exps] = c * factor;
  return out;
}

int Polynomial::total_degree() const {
  int deg = 0;
  for (const auto& [exps, c] : terms_) {
    int d = 0;
    for (int e : exps) d += e;
    deg = std::max(deg, d);
  }
  return deg;
}

int Polynomial::degree_in(int variable) const {
  int deg = 0;
  for (const auto& [exps, c] : terms_) deg = std::max(deg, exps[variable]);
  return deg;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [exps, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::eval(std::span<const double> values) const {
  if (values.size() != variables_.size()) {
    throw std::invalid_argument("Polynomial::eval: got " + std::to_string(values.size()) +
                                " values for " + std::to_string(variables_.size()) +
                                " variables");
  }
  double sum = 0.0;
  for (const auto& [exps, c] : terms_) {
    double term = c;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] > 0) term *= int_pow(values[i], exps[i]);
    }
    sum += term;
  }
  return sum;
}

double Polynomial::eval(const std::map<std::string, double>& assignment) const {
  std::vector<double> values(variables_.size());
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    auto it = assignment.find(variables_[i]);
    if (it == assignment.end()) {
      throw std::invalid_argument("Polynomial::eval: variable '" + variables_[i] +
                                  "' is unassigned");
    }
    values[i] = it->second;
  }
  return eval(values);
}

Polynomial Polynomial::substitute(int variable, double value) const {
  Polynomial out(variables_);
  Exponents reduced;
  for (const auto& [exps, c] : terms_) {
    reduced = exps;
    const int k = reduced[variable];
    reduced[variable] = 0;
    out.add_term(reduced, c * int_pow(value, k));
  }
  return out;
}

Polynomial Polynomial::substitute_affine(int variable, double offset, double scale) const {
  // x^k -> (offset + scale*x)^k expanded binomially.
  Polynomial out(variables_);
  Exponents shifted;
  for (const auto& [exps, c] : terms_) {
    const int k = exps[variable];
    shifted = exps;
    double binom = 1.0;  // C(k, j) built incrementally
    for (int j = 0; j <= k; ++j) {
      shifted[variable] = j;
      out.add_term(shifted, c * binom * int_pow(offset, k - j) * int_pow(scale, j));
      binom = binom * (k - j) / (j + 1);
    }
  }
  return out;
}

Polynomial Polynomial::drop_variable(int variable) const {
  std::vector<std::string> vars;
  for (int i = 0; i < num_variables(); ++i) {
    if (i != variable) vars.push_back(variables_[i]);
  }
  Polynomial out(vars);
  Exponents reduced(vars.size());
  for (const auto& [exps, c] : terms_) {
    if (exps[variable] != 0) {
      throw std::invalid_argument("Polynomial::drop_variable: '" + variables_[variable] +
                                  "' still appears in a term");
    }
    std::size_t j = 0;
    for (int i = 0; i < num_variables(); ++i) {
      if (i != variable) reduced[j++] = exps[i];
    }
    out.add_term(reduced, c);
  }
  return out;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [exps, c] : terms_) {
    if (!first) os << (c >= 0 ? " + " : " - ");
    else if (c < 0) os << "-";
    os << std::abs(c);
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] > 0) {
        os << "*" << variables_[i];
        if (exps[i] > 1) os << "^" << exps[i];
      }
    }
    first = false;
  }
  return os.str();
}

}  // namespace riskplan
