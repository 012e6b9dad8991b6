#include "riskplan/distribution.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace riskplan {

ScalarDistribution ScalarDistribution::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("uniform: requires lo < hi");
  ScalarDistribution d;
  d.kind = Kind::Uniform;
  d.a = lo;
  d.b = hi;
  return d;
}

ScalarDistribution ScalarDistribution::gaussian(double mean, double std) {
  if (!(std > 0.0)) throw std::invalid_argument("gaussian: requires std > 0");
  ScalarDistribution d;
  d.kind = Kind::Gaussian;
  d.a = mean;
  d.b = std;
  return d;
}

ScalarDistribution ScalarDistribution::beta(double alpha, double beta, double lo, double hi) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("beta: requires shape > 0");
  if (!(lo < hi)) throw std::invalid_argument("beta: requires lo < hi");
  ScalarDistribution d;
  d.kind = Kind::Beta;
  d.a = alpha;
  d.b = beta;
  d.lo = lo;
  d.hi = hi;
  return d;
}

double ScalarDistribution::raw_moment(int k) const {
  if (k < 0) throw std::invalid_argument("raw_moment: negative order");
  if (k == 0) return 1.0;
  switch (kind) {
    case Kind::Uniform: {
      // (hi^{k+1} - lo^{k+1}) / ((k+1)(hi - lo))
      double num = std::pow(b, k + 1) - std::pow(a, k + 1);
      return num / ((k + 1) * (b - a));
    }
    case Kind::Gaussian: {
      // M_k = mean*M_{k-1} + (k-1)*std^2*M_{k-2}
      double m_prev2 = 1.0;
      double m_prev1 = a;
      for (int i = 2; i <= k; ++i) {
        double m = a * m_prev1 + (i - 1) * b * b * m_prev2;
        m_prev2 = m_prev1;
        m_prev1 = m;
      }
      return m_prev1;
    }
    case Kind::Beta: {
      // Standard Beta on [0,1]: E[X^j] = prod_{r<j} (a+r)/(a+b+r); the
      // supported variable is lo + (hi-lo)X, expanded binomially.
      std::vector<double> std_moments(k + 1, 1.0);
      for (int j = 1; j <= k; ++j) {
        std_moments[j] = std_moments[j - 1] * (a + (j - 1)) / (a + b + (j - 1));
      }
      const double w = hi - lo;
      double sum = 0.0;
      double binom = 1.0;
      for (int j = 0; j <= k; ++j) {
        sum += binom * std::pow(lo, k - j) * std::pow(w, j) * std_moments[j];
        binom = binom * (k - j) / (j + 1);
      }
      return sum;
    }
  }
  throw std::logic_error("raw_moment: unsupported distribution kind");
}

double ScalarDistribution::variance() const {
  double m1 = raw_moment(1);
  return raw_moment(2) - m1 * m1;
}

double ScalarDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Uniform:
      return rng.uniform(a, b);
    case Kind::Gaussian:
      return rng.gaussian(a, b);
    case Kind::Beta:
      return lo + (hi - lo) * rng.beta(a, b);
  }
  throw std::logic_error("sample: unsupported distribution kind");
}

std::string ScalarDistribution::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Uniform:
      os << "Uniform(" << a << ", " << b << ")";
      break;
    case Kind::Gaussian:
      os << "Gaussian(" << a << ", " << b << ")";
      break;
    case Kind::Beta:
      os << "Beta(" << a << ", " << b << ", [" << lo << ", " << hi << "])";
      break;
  }
  return os.str();
}

}  // namespace riskplan
