#include "riskplan/distribution.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace riskplan;

namespace {

// Trapezoid integration of w^k against the uniform density.
double uniform_moment_quadrature(double lo, double hi, int k, int n = 1000000) {
  const double dw = (hi - lo) / n;
  double sum = 0.5 * (std::pow(lo, k) + std::pow(hi, k));
  for (int i = 1; i < n; ++i) sum += std::pow(lo + i * dw, k);
  return sum * dw / (hi - lo);
}

double mc_moment(const ScalarDistribution& d, int k, int n, std::uint64_t seed) {
  Rng rng(seed);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::pow(d.sample(rng), k);
  return sum / n;
}

}  // namespace

TEST(Distribution, ZerothMomentIsOne) {
  EXPECT_DOUBLE_EQ(ScalarDistribution::uniform(1, 2).raw_moment(0), 1.0);
  EXPECT_DOUBLE_EQ(ScalarDistribution::gaussian(0.3, 0.2).raw_moment(0), 1.0);
  EXPECT_DOUBLE_EQ(ScalarDistribution::beta(2, 5, -1, 1).raw_moment(0), 1.0);
}

TEST(Distribution, UniformSecondMomentMatchesQuadrature) {
  const auto d = ScalarDistribution::uniform(1.0, 2.0);
  EXPECT_NEAR(d.raw_moment(2), 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.raw_moment(2), uniform_moment_quadrature(1.0, 2.0, 2), 1e-6);
  EXPECT_NEAR(d.raw_moment(4), 31.0 / 5.0, 1e-12);
}

TEST(Distribution, GaussianSecondMomentIsMeanSqPlusVar) {
  const auto d = ScalarDistribution::gaussian(0.05, 0.01);
  EXPECT_NEAR(d.raw_moment(2), 0.0026, 1e-15);
  EXPECT_NEAR(d.raw_moment(1), 0.05, 1e-15);
  // Fourth central moment of a Gaussian is 3 sigma^4.
  const double m4 = d.raw_moment(4);
  const double mu = 0.05, s = 0.01;
  const double expected =
      3 * s * s * s * s + 6 * mu * mu * s * s + mu * mu * mu * mu;
  EXPECT_NEAR(m4, expected, 1e-15);
}

TEST(Distribution, MomentsAgreeWithMonteCarlo) {
  const int n = 400000;
  const std::vector<ScalarDistribution> dists = {
      ScalarDistribution::uniform(1.0, 2.0),
      ScalarDistribution::gaussian(0.05, 0.01),
      ScalarDistribution::gaussian(0.2, 0.2),
      ScalarDistribution::beta(2.0, 3.0, -0.1, 0.4),
  };
  for (std::size_t i = 0; i < dists.size(); ++i) {
    for (int k = 1; k <= 6; ++k) {
      const double closed = dists[i].raw_moment(k);
      const double mc = mc_moment(dists[i], k, n, 100 + i);
      EXPECT_NEAR(closed, mc, 5e-3 * std::max(1.0, std::abs(closed)))
          << dists[i].to_string() << " k=" << k;
    }
  }
}

TEST(Distribution, BetaMomentsMatchShiftedFormula) {
  // Standard Beta(2, 3): E[X] = 2/5, E[X^2] = 2*3/(5*6) = 1/5.
  const auto d = ScalarDistribution::beta(2.0, 3.0, 0.0, 1.0);
  EXPECT_NEAR(d.raw_moment(1), 0.4, 1e-14);
  EXPECT_NEAR(d.raw_moment(2), 0.2, 1e-14);
  // Shift/scale to [1, 3]: w = 1 + 2X.
  const auto s = ScalarDistribution::beta(2.0, 3.0, 1.0, 3.0);
  EXPECT_NEAR(s.raw_moment(1), 1.0 + 2.0 * 0.4, 1e-14);
  EXPECT_NEAR(s.raw_moment(2), 1.0 + 4.0 * 0.4 + 4.0 * 0.2, 1e-14);
}

TEST(Distribution, VarianceIsNonnegative) {
  EXPECT_NEAR(ScalarDistribution::uniform(-1, 1).variance(), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(ScalarDistribution::gaussian(5.0, 0.7).variance(), 0.49, 1e-12);
  EXPECT_GT(ScalarDistribution::beta(2, 2, 0, 1).variance(), 0.0);
}

TEST(Distribution, InvalidParametersThrow) {
  EXPECT_THROW(ScalarDistribution::uniform(2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ScalarDistribution::gaussian(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(ScalarDistribution::beta(0.0, 1.0), std::invalid_argument);
}

TEST(Distribution, SamplingIsDeterministicPerSeed) {
  const auto d = ScalarDistribution::beta(2.0, 3.0, -1.0, 1.0);
  Rng a(42), b(42), c(43);
  EXPECT_EQ(d.sample(a), d.sample(b));
  EXPECT_NE(d.sample(a), d.sample(c));
}

TEST(Distribution, SampleStatisticsMatchMoments) {
  for (const auto& d : {ScalarDistribution::uniform(-0.1, 0.1),
                        ScalarDistribution::gaussian(0.2, 0.2),
                        ScalarDistribution::beta(3.0, 2.0, 0.0, 2.0)}) {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = d.sample(rng);
      sum += w;
      sq += w * w;
    }
    EXPECT_NEAR(sum / n, d.mean(), 0.02 * std::max(0.05, std::abs(d.mean())));
    EXPECT_NEAR(sq / n, d.raw_moment(2), 0.02 * std::max(0.05, d.raw_moment(2)));
  }
}
