#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "synthmetric/rng.hpp"
#include "synthmetric/stats.hpp"

namespace sm = synthmetric;

TEST(Moments, MeanVarianceStddevMedian) {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(sm::mean(v), 2.5);
  EXPECT_DOUBLE_EQ(sm::variance(v), 5.0 / 3.0);  // n-1 denominator
  EXPECT_DOUBLE_EQ(sm::stddev(v), std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(sm::median(v), 2.5);
  EXPECT_DOUBLE_EQ(sm::median(std::vector<double>{3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(sm::median(std::vector<double>{7.0}), 7.0);
  EXPECT_THROW(sm::mean(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(sm::median(std::vector<double>{}), std::invalid_argument);
}

// Reference values from scipy.stats.norm (double precision).
TEST(NormalDistribution, CdfMatchesReference) {
  EXPECT_NEAR(sm::normal_cdf(0.0), 0.5, 1e-15);
  EXPECT_NEAR(sm::normal_cdf(1.96), 0.9750021048517795, 1e-14);
  EXPECT_NEAR(sm::normal_cdf(-1.0), 0.15865525393145707, 1e-14);
  EXPECT_NEAR(sm::normal_cdf(2.5), 0.9937903346742238, 1e-14);
  EXPECT_NEAR(sm::normal_cdf(1.0) + sm::normal_cdf(-1.0), 1.0, 1e-15);
}

TEST(NormalDistribution, QuantileMatchesReference) {
  EXPECT_NEAR(sm::normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(sm::normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(sm::normal_quantile(0.01), -2.3263478740408408, 1e-12);
  EXPECT_NEAR(sm::normal_quantile(0.6), 0.2533471031357997, 1e-13);
  EXPECT_NEAR(sm::normal_quantile(1e-10), -6.361340902404056, 1e-9);
  EXPECT_THROW(sm::normal_quantile(0.0), std::invalid_argument);
  EXPECT_THROW(sm::normal_quantile(1.0), std::invalid_argument);
}

TEST(NormalDistribution, QuantileInvertsCdf) {
  for (double x = -5.0; x <= 5.0; x += 0.25) {
    EXPECT_NEAR(sm::normal_quantile(sm::normal_cdf(x)), x, 1e-9) << "at x = " << x;
  }
}

// Reference values from scipy.stats.chi2.cdf.
TEST(ChiSquared, CdfMatchesReference) {
  EXPECT_NEAR(sm::chi_squared_cdf(15.0, 15), 0.5485827887742752, 1e-12);
  EXPECT_NEAR(sm::chi_squared_cdf(7.26094, 15), 0.049999878650504134, 1e-12);
  EXPECT_NEAR(sm::chi_squared_cdf(3.5, 1), 0.9386311708605977, 1e-12);
  EXPECT_NEAR(sm::chi_squared_cdf(20.0, 55), 3.820824746039338e-06, 1e-16);
  EXPECT_NEAR(sm::chi_squared_cdf(55.0, 55), 0.525363140811172, 1e-12);
  EXPECT_NEAR(sm::chi_squared_cdf(0.5, 2), 0.22119921692859512, 1e-12);
  EXPECT_DOUBLE_EQ(sm::chi_squared_cdf(0.0, 5), 0.0);
  EXPECT_DOUBLE_EQ(sm::chi_squared_cdf(-1.0, 5), 0.0);
}

TEST(KolmogorovSmirnov, StatisticAgainstHandComputation) {
  // Sample {0.1, 0.4, 0.7} against U(0,1): D = max gap between the empirical
  // step function and the identity.
  const std::vector<double> sample = {0.7, 0.1, 0.4};
  const double d = sm::ks_statistic(sample, [](double x) { return x; });
  // Steps: F(0.1)=0.1 vs i/n {0, 1/3}; F(0.4)=0.4 vs {1/3, 2/3}; F(0.7)=0.7 vs {2/3, 1}.
  EXPECT_NEAR(d, 0.3, 1e-15);
}

TEST(KolmogorovSmirnov, PValueMatchesAsymptoticSeries) {
  // Reference: scipy.special.kolmogorov evaluated at the Stephens-corrected
  // statistic t = d (sqrt(n) + 0.12 + 0.11/sqrt(n)).
  EXPECT_NEAR(sm::ks_pvalue(0.05, 500), 0.15955408974378785, 1e-10);
  EXPECT_NEAR(sm::ks_pvalue(0.08, 100), 0.5271894070857895, 1e-10);
  EXPECT_NEAR(sm::ks_pvalue(0.02, 1000), 0.8149480335331604, 1e-10);
}

TEST(KolmogorovSmirnov, UniformSampleNotRejected) {
  sm::Rng rng(31);
  std::vector<double> sample(2000);
  for (auto& v : sample) v = rng.uniform();
  const double d = sm::ks_statistic(sample, [](double x) { return x; });
  EXPECT_GT(sm::ks_pvalue(d, sample.size()), 0.01);

  // Shifted sample must be rejected decisively.
  for (auto& v : sample) v = 0.5 + 0.5 * v;
  const double d2 = sm::ks_statistic(sample, [](double x) { return x; });
  EXPECT_LT(sm::ks_pvalue(d2, sample.size()), 1e-10);
}
