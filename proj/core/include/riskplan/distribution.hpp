#pragma once

#include <string>

#include "riskplan/rng.hpp"

namespace riskplan {

// Scalar random variable with closed-form raw moments of every order.
// Gaussian parameters are (mean, standard deviation) throughout.
struct ScalarDistribution {
  enum class Kind { Uniform, Gaussian, Beta };

  Kind kind = Kind::Uniform;
  double a = 0.0;   // Uniform: lo; Gaussian: mean; Beta: alpha
  double b = 1.0;   // Uniform: hi; Gaussian: std;  Beta: beta
  double lo = 0.0;  // Beta support lower bound
  double hi = 1.0;  // Beta support upper bound

  static ScalarDistribution uniform(double lo, double hi);
  static ScalarDistribution gaussian(double mean, double std);
  static ScalarDistribution beta(double alpha, double beta, double lo = 0.0, double hi = 1.0);

  // E[w^k] in closed form.
  double raw_moment(int k) const;
  double mean() const { return raw_moment(1); }
  double variance() const;

  double sample(Rng& rng) const;

  std::string to_string() const;
};

}  // namespace riskplan
