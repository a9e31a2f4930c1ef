#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracle_data.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/rng.hpp"
#include "test_support.hpp"

namespace sm = synthmetric;

namespace {

Eigen::MatrixXd design_with_intercept(const std::vector<double>& a, const std::vector<double>& b) {
  const Eigen::Index n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd X(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = a[static_cast<std::size_t>(i)];
    X(i, 2) = b[static_cast<std::size_t>(i)];
  }
  return X;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd to_vector(const std::vector<int>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

TEST(Logistic, MatchesReferenceFit) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_bin);
  const sm::GlmFit fit = sm::fit_logistic(X, y);
  ASSERT_TRUE(fit.converged);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(fit.coefficients(j), oracle::logit_coef[j], 2e-7) << "coef " << j;
    EXPECT_NEAR(fit.standard_errors(j), oracle::logit_se[j], 2e-6) << "se " << j;
  }
}

TEST(Logistic, ScoreEquationsAndMeanFittedAtOptimum) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_bin);
  const sm::GlmFit fit = sm::fit_logistic(X, y, 50, 1e-12);
  ASSERT_TRUE(fit.converged);
  const Eigen::VectorXd score = X.transpose() * (y - fit.fitted);
  EXPECT_LT(score.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(fit.fitted.mean(), y.mean(), 1e-10);
}

TEST(Logistic, MatchesBruteForceLikelihoodOracle) {
  sm::Rng rng(101);
  for (int instance = 0; instance < 5; ++instance) {
    const Eigen::Index n = 60;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd beta_true(3);
    beta_true << rng.normal() * 0.5, rng.normal(), rng.normal();
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = rng.normal();
      X(i, 2) = rng.normal();
      y(i) = (rng.uniform() < sm::expit(X.row(i).dot(beta_true))) ? 1.0 : 0.0;
    }
    if (y.sum() < 3 || y.sum() > n - 3) continue;  // skip near-degenerate draws

    const sm::GlmFit fit = sm::fit_logistic(X, y, 50, 1e-10);
    ASSERT_TRUE(fit.converged) << "instance " << instance;

    const auto nll = [&](const Eigen::VectorXd& b) { return testsupport::logistic_nll(X, y, b); };
    const Eigen::VectorXd oracle_beta =
        testsupport::bfgs_minimize(nll, Eigen::VectorXd::Zero(3));
    EXPECT_LT((fit.coefficients - oracle_beta).cwiseAbs().maxCoeff(), 1e-5)
        << "instance " << instance;
  }
}

TEST(Logistic, PredictionsAreAffineInvariant) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_bin);
  Eigen::MatrixXd Xs = X;
  Xs.col(1) = 2.0 * X.col(1).array() + 3.0;
  Xs.col(2) = -0.5 * X.col(2).array() + 1.0;
  const sm::GlmFit f1 = sm::fit_logistic(X, y, 50, 1e-10);
  const sm::GlmFit f2 = sm::fit_logistic(Xs, y, 50, 1e-10);
  EXPECT_LT((f1.fitted - f2.fitted).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Logistic, SeparationFlagOnSeparableData) {
  Eigen::MatrixXd X(8, 2);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = static_cast<double>(i) - 3.5;
    y(i) = (i >= 4) ? 1.0 : 0.0;
  }
  const sm::GlmFit fit = sm::fit_logistic(X, y, 40);
  EXPECT_TRUE(fit.separation);
  // Iteration keeps going after separation is first detected, so even the
  // innermost points end up with essentially degenerate fitted probabilities.
  EXPECT_LT(fit.fitted(3), 1e-6);
  EXPECT_GT(fit.fitted(4), 1.0 - 1e-6);
}

TEST(Logistic, InputValidation) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd y(4);
  y << 0, 1, 0, 2;
  EXPECT_THROW(sm::fit_logistic(X, y), std::invalid_argument);
  y << 0, 1, 0, 1;
  EXPECT_THROW(sm::fit_logistic(X, y.head(3)), std::invalid_argument);
  EXPECT_THROW(sm::fit_logistic(Eigen::MatrixXd(0, 0), Eigen::VectorXd(0)),
               std::invalid_argument);

  // Exactly collinear columns cannot be fit (the response must be unbalanced,
  // otherwise beta = 0 is already the optimum and no solve happens).
  Eigen::MatrixXd Xc(4, 2);
  Xc.col(0).setOnes();
  Xc.col(1).setOnes();
  Eigen::VectorXd yu(4);
  yu << 0, 1, 1, 1;
  EXPECT_THROW(sm::fit_logistic(Xc, yu), std::runtime_error);
}

TEST(Linear, MatchesReferenceFit) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_lin);
  const sm::GlmFit fit = sm::fit_linear(X, y);
  ASSERT_TRUE(fit.converged);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(fit.coefficients(j), oracle::ols_coef[j], 1e-7) << "coef " << j;
    EXPECT_NEAR(fit.standard_errors(j), oracle::ols_se[j], 1e-7) << "se " << j;
  }
  EXPECT_NEAR(fit.deviance, oracle::ols_resid_sd, 1e-12);
  EXPECT_TRUE(fit.dropped_columns.empty());
}

TEST(Linear, RankDeficientColumnsAreDroppedNotFatal) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_lin);

  Eigen::MatrixXd Xd(X.rows(), 4);
  Eigen::MatrixXd Xsub = X;
  Xd << X, X.col(1);  // duplicate x1
  const sm::GlmFit full = sm::fit_linear(Xsub, y);
  const sm::GlmFit fit = sm::fit_linear(Xd, y);

  ASSERT_EQ(fit.dropped_columns.size(), 1u);
  const int dropped = fit.dropped_columns[0];
  EXPECT_TRUE(dropped == 1 || dropped == 3) << dropped;
  EXPECT_TRUE(std::isnan(fit.coefficients(dropped)));
  EXPECT_TRUE(std::isnan(fit.standard_errors(dropped)));
  EXPECT_FALSE(std::isnan(fit.coefficients(0)));
  EXPECT_LT((fit.fitted - full.fitted).cwiseAbs().maxCoeff(), 1e-9);

  // predict_linear treats dropped coefficients as zero contributions.
  const Eigen::VectorXd pred = sm::predict_linear(fit, Xd);
  EXPECT_LT((pred - full.fitted).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Multinomial, MatchesReferenceFit) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x3, oracle::x4);
  std::vector<std::int32_t> codes(oracle::y_mnl.begin(), oracle::y_mnl.end());
  const sm::GlmFit fit = sm::fit_multinomial(X, codes, 3, 50, 1e-10);
  ASSERT_TRUE(fit.converged);
  ASSERT_EQ(fit.coefficients.size(), 6);
  for (int j = 0; j < 6; ++j) {
    EXPECT_NEAR(fit.coefficients(j), oracle::mnl_coef[j], 2e-6) << "coef " << j;
    EXPECT_NEAR(fit.standard_errors(j), oracle::mnl_se[j], 2e-5) << "se " << j;
  }
  // Rows of class_probs are distributions.
  for (Eigen::Index i = 0; i < fit.class_probs.rows(); ++i)
    EXPECT_NEAR(fit.class_probs.row(i).sum(), 1.0, 1e-12);
}

TEST(Multinomial, MatchesBruteForceLikelihoodOracle) {
  sm::Rng rng(202);
  for (int instance = 0; instance < 3; ++instance) {
    const Eigen::Index n = 90;
    const int K = 3;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd b1(2), b2(2);
    b1 << rng.normal() * 0.5, rng.normal();
    b2 << rng.normal() * 0.5, rng.normal();
    std::vector<std::int32_t> codes(static_cast<std::size_t>(n));
    std::vector<int> codes_int(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = rng.normal();
      const double e1 = std::exp(X.row(i).dot(b1));
      const double e2 = std::exp(X.row(i).dot(b2));
      const double denom = 1.0 + e1 + e2;
      const double u = rng.uniform();
      int c = 0;
      if (u < e1 / denom) c = 1;
      else if (u < (e1 + e2) / denom) c = 2;
      codes[static_cast<std::size_t>(i)] = c;
      codes_int[static_cast<std::size_t>(i)] = c;
    }
    int c1 = 0, c2 = 0;
    for (int c : codes_int) {
      c1 += (c == 1);
      c2 += (c == 2);
    }
    if (c1 < 5 || c2 < 5 || c1 + c2 > n - 5) continue;

    const sm::GlmFit fit = sm::fit_multinomial(X, codes, K, 60, 1e-10);
    ASSERT_TRUE(fit.converged) << "instance " << instance;

    const auto nll = [&](const Eigen::VectorXd& b) {
      return testsupport::multinomial_nll(X, codes_int, K, b);
    };
    const Eigen::VectorXd oracle_beta =
        testsupport::bfgs_minimize(nll, Eigen::VectorXd::Zero(4));
    EXPECT_LT((fit.coefficients - oracle_beta).cwiseAbs().maxCoeff(), 1e-5)
        << "instance " << instance;
  }
}

TEST(Multinomial, TwoClassesReduceToLogistic) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  const Eigen::VectorXd y = to_vector(oracle::y_bin);
  std::vector<std::int32_t> codes(oracle::y_bin.begin(), oracle::y_bin.end());

  const sm::GlmFit lf = sm::fit_logistic(X, y, 50, 1e-10);
  const sm::GlmFit mf = sm::fit_multinomial(X, codes, 2, 50, 1e-10);
  ASSERT_TRUE(mf.converged);
  EXPECT_LT((lf.coefficients - mf.coefficients).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((lf.fitted - mf.class_probs.col(1)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Multinomial, UnobservedClassesGetZeroProbability) {
  const Eigen::MatrixXd X = design_with_intercept(oracle::x1, oracle::x2);
  std::vector<std::int32_t> codes(oracle::y_bin.begin(), oracle::y_bin.end());
  for (auto& c : codes)
    if (c == 1) c = 2;  // observed classes are {0, 2} out of 4

  const sm::GlmFit fit = sm::fit_multinomial(X, codes, 4, 50, 1e-10);
  EXPECT_EQ(fit.n_classes, 4);
  EXPECT_EQ(fit.active_classes, (std::vector<int>{0, 2}));
  EXPECT_DOUBLE_EQ(fit.class_probs.col(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(fit.class_probs.col(3).cwiseAbs().maxCoeff(), 0.0);

  const Eigen::MatrixXd pred = sm::predict_multinomial(fit, X);
  EXPECT_LT((pred - fit.class_probs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Multinomial, InputValidation) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 1);
  EXPECT_THROW(sm::fit_multinomial(X, {0, 0, 0, 0}, 3), std::invalid_argument);  // one class
  EXPECT_THROW(sm::fit_multinomial(X, {0, 1, 0}, 3), std::invalid_argument);     // size mismatch
  EXPECT_THROW(sm::fit_multinomial(X, {0, 1, 0, 5}, 3), std::invalid_argument);  // out of range
  EXPECT_THROW(sm::fit_multinomial(X, {0, 1, 0, 1}, 1), std::invalid_argument);  // n_classes < 2
}
