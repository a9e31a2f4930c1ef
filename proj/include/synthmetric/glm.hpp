#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthmetric {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Linear predictors beyond this magnitude indicate (quasi-)separation: the
// fitted probabilities are numerically 0/1 and further Newton steps only push
// coefficients toward infinity.
inline constexpr double kSeparationEta = 30.0;

struct GlmFit {
  Eigen::VectorXd coefficients;     // k entries; multinomial: (K'-1) blocks of k
  Eigen::VectorXd standard_errors;  // aligned with coefficients (NaN when dropped)
  Eigen::VectorXd fitted;           // binomial: P(y=1); gaussian: X*beta
  Eigen::MatrixXd class_probs;      // multinomial only: n x n_classes
  std::vector<int> active_classes;  // multinomial: observed class codes, [0] is the reference
  int n_classes = 0;                // multinomial: total classes incl. unobserved
  bool converged = false;
  bool separation = false;
  int iterations = 0;
  double deviance = 0.0;            // gaussian: residual standard deviation
  std::vector<int> dropped_columns; // gaussian: rank-deficient columns (coefficient = NaN)
};

namespace detail {

// Solves H x = g, rejecting numerically singular systems.
inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                 const char* context) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  const double dmin = d.cwiseAbs().minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || dmin <= dmax * 1e-13)
    throw std::runtime_error(std::string(context) +
                             ": singular weighted cross-product; drop collinear columns");
  return ldlt.solve(g);
}

inline double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p(i), 1e-12, 1.0 - 1e-12);
    ll += y(i) * std::log(pi) + (1.0 - y(i)) * std::log(1.0 - pi);
  }
  return -2.0 * ll;
}

}  // namespace detail

// Logistic regression by iteratively reweighted least squares (Newton-Raphson
// on the log-likelihood). Converges when the score norm ||X'(y-p)||_inf drops
// below `tol`; with an intercept column this forces mean(fitted) to match
// mean(y) at convergence. Quasi-separation (any |eta| > kSeparationEta) sets
// the `separation` flag; iteration still runs to convergence or max_iter so
// the fitted probabilities reflect the full maximum-likelihood path.
inline GlmFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_iter = 25,
                           double tol = 1e-8) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n != y.size()) throw std::invalid_argument("fit_logistic: X and y sizes differ");
  if (k == 0 || n == 0) throw std::invalid_argument("fit_logistic: empty design");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y(i) != 0.0 && y(i) != 1.0)
      throw std::invalid_argument("fit_logistic: response must be 0/1");

  GlmFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 0.5);

  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    eta.noalias() = X * fit.coefficients;
    p = eta.unaryExpr([](double e) { return expit(e); });
    if (eta.cwiseAbs().maxCoeff() > kSeparationEta) fit.separation = true;
    const Eigen::VectorXd score = X.transpose() * (y - p);
    if (score.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd w =
        (p.array() * (1.0 - p.array())).max(1e-10).matrix();
    const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    fit.coefficients += detail::solve_spd(H, score, "fit_logistic");
  }

  fit.fitted = p;
  fit.deviance = detail::binomial_deviance(y, p);
  {
    const Eigen::VectorXd w = (p.array() * (1.0 - p.array())).max(1e-10).matrix();
    const Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
    const Eigen::MatrixXd Hinv =
        H.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    fit.standard_errors = Hinv.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

// Ordinary least squares via column-pivoted QR. Rank-deficient columns are
// dropped (coefficient and SE set to NaN, indices recorded) rather than
// failing, so callers can report which terms were inestimable. The residual
// standard deviation is recorded in `deviance`.
inline GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n != y.size()) throw std::invalid_argument("fit_linear: X and y sizes differ");
  if (k == 0 || n == 0) throw std::invalid_argument("fit_linear: empty design");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  std::vector<bool> kept(static_cast<std::size_t>(k), false);
  for (Eigen::Index i = 0; i < r; ++i)
    kept[static_cast<std::size_t>(qr.colsPermutation().indices()(i))] = true;

  GlmFit fit;
  fit.converged = true;
  fit.iterations = 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.coefficients = Eigen::VectorXd::Constant(k, nan);
  fit.standard_errors = Eigen::VectorXd::Constant(k, nan);

  Eigen::MatrixXd Xk(n, r);
  std::vector<Eigen::Index> kept_idx;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!kept[static_cast<std::size_t>(j)]) {
      fit.dropped_columns.push_back(static_cast<int>(j));
      continue;
    }
    Xk.col(static_cast<Eigen::Index>(kept_idx.size())) = X.col(j);
    kept_idx.push_back(j);
  }
  if (r == 0) throw std::runtime_error("fit_linear: design has rank 0");

  const Eigen::VectorXd beta = Xk.householderQr().solve(y);
  const Eigen::VectorXd resid = y - Xk * beta;
  const double dof = static_cast<double>(n - r);
  const double sigma2 = (dof > 0.0) ? resid.squaredNorm() / dof : 0.0;
  const Eigen::MatrixXd XtXinv =
      (Xk.transpose() * Xk).ldlt().solve(Eigen::MatrixXd::Identity(r, r));
  for (Eigen::Index i = 0; i < r; ++i) {
    fit.coefficients(kept_idx[static_cast<std::size_t>(i)]) = beta(i);
    fit.standard_errors(kept_idx[static_cast<std::size_t>(i)]) =
        std::sqrt(std::max(0.0, sigma2 * XtXinv(i, i)));
  }
  fit.fitted = Xk * beta;
  fit.deviance = std::sqrt(sigma2);
  return fit;
}

inline Eigen::VectorXd predict_linear(const GlmFit& fit, const Eigen::MatrixXd& X) {
  Eigen::VectorXd beta = fit.coefficients;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (std::isnan(beta(j))) beta(j) = 0.0;  // dropped columns contribute nothing
  return X * beta;
}

// Multinomial logistic regression by full Newton steps with step-halving.
// Classes that never occur in `codes` get probability zero and are excluded
// from the optimization; the first observed class is the reference. The
// coefficient vector stacks one k-sized block per non-reference active class.
inline GlmFit fit_multinomial(const Eigen::MatrixXd& X, const std::vector<std::int32_t>& codes,
                              int n_classes, int max_iter = 25, double tol = 1e-8) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (static_cast<std::size_t>(n) != codes.size())
    throw std::invalid_argument("fit_multinomial: X and codes sizes differ");
  if (n_classes < 2) throw std::invalid_argument("fit_multinomial: need at least 2 classes");

  std::vector<Eigen::Index> count(static_cast<std::size_t>(n_classes), 0);
  for (const auto c : codes) {
    if (c < 0 || c >= n_classes)
      throw std::invalid_argument("fit_multinomial: class code out of range");
    ++count[static_cast<std::size_t>(c)];
  }
  GlmFit fit;
  fit.n_classes = n_classes;
  for (int c = 0; c < n_classes; ++c)
    if (count[static_cast<std::size_t>(c)] > 0) fit.active_classes.push_back(c);
  const int Ka = static_cast<int>(fit.active_classes.size());
  if (Ka < 2)
    throw std::invalid_argument("fit_multinomial: degenerate response (single observed class)");

  std::vector<int> dense(static_cast<std::size_t>(n_classes), -1);
  for (int a = 0; a < Ka; ++a) dense[static_cast<std::size_t>(fit.active_classes[a])] = a;
  const int B = Ka - 1;  // coefficient blocks
  const Eigen::Index dim = static_cast<Eigen::Index>(B) * k;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd P(n, B);  // probabilities of the non-reference active classes

  const auto compute_probs = [&](const Eigen::VectorXd& b, Eigen::MatrixXd& probs,
                                 double* max_eta) -> void {
    Eigen::MatrixXd eta(n, B);
    for (int c = 0; c < B; ++c)
      eta.col(c).noalias() = X * b.segment(static_cast<Eigen::Index>(c) * k, k);
    *max_eta = eta.size() ? eta.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = std::max(0.0, eta.row(i).maxCoeff());
      double denom = std::exp(-m);
      for (int c = 0; c < B; ++c) denom += std::exp(eta(i, c) - m);
      for (int c = 0; c < B; ++c) probs(i, c) = std::exp(eta(i, c) - m) / denom;
    }
  };
  const auto deviance_at = [&](const Eigen::MatrixXd& probs) -> double {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = dense[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])];
      double pi;
      if (a == 0) {
        pi = 1.0 - probs.row(i).sum();
      } else {
        pi = probs(i, a - 1);
      }
      ll += std::log(std::clamp(pi, 1e-12, 1.0));
    }
    return -2.0 * ll;
  };

  double max_eta = 0.0;
  compute_probs(beta, P, &max_eta);
  double dev = deviance_at(P);

  for (int it = 1; it <= max_iter; ++it) {
    fit.iterations = it;
    if (max_eta > kSeparationEta) fit.separation = true;
    // Score.
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (int c = 0; c < B; ++c) {
      Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i)
        if (dense[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])] == c + 1)
          ind(i) = 1.0;
      g.segment(static_cast<Eigen::Index>(c) * k, k).noalias() =
          X.transpose() * (ind - P.col(c));
    }
    if (g.cwiseAbs().maxCoeff() < tol) {
      fit.converged = true;
      break;
    }
    // Hessian blocks: H[c,d] = X' diag(p_c (delta_cd - p_d)) X.
    Eigen::MatrixXd H(dim, dim);
    for (int c = 0; c < B; ++c)
      for (int d = c; d < B; ++d) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i)
          w(i) = P(i, c) * ((c == d ? 1.0 : 0.0) - P(i, d));
        if (c == d) w = w.cwiseMax(1e-10);
        const Eigen::MatrixXd block = X.transpose() * w.asDiagonal() * X;
        H.block(static_cast<Eigen::Index>(c) * k, static_cast<Eigen::Index>(d) * k, k, k) = block;
        if (c != d)
          H.block(static_cast<Eigen::Index>(d) * k, static_cast<Eigen::Index>(c) * k, k, k) =
              block;
      }
    const Eigen::VectorXd step = detail::solve_spd(H, g, "fit_multinomial");
    // Step-halving keeps the deviance non-increasing.
    double scale = 1.0;
    for (int h = 0; h < 20; ++h) {
      Eigen::MatrixXd Pn(n, B);
      double me = 0.0;
      compute_probs(beta + scale * step, Pn, &me);
      const double dn = deviance_at(Pn);
      if (dn <= dev * (1.0 + 1e-12) || me > kSeparationEta) {
        beta += scale * step;
        P = Pn;
        dev = dn;
        max_eta = me;
        break;
      }
      scale *= 0.5;
      if (h == 19) {
        beta += scale * step;
        compute_probs(beta, P, &max_eta);
        dev = deviance_at(P);
      }
    }
  }

  fit.coefficients = beta;
  fit.deviance = dev;
  fit.class_probs = Eigen::MatrixXd::Zero(n, n_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    double rest = 0.0;
    for (int c = 0; c < B; ++c) {
      fit.class_probs(i, fit.active_classes[static_cast<std::size_t>(c + 1)]) = P(i, c);
      rest += P(i, c);
    }
    fit.class_probs(i, fit.active_classes[0]) = 1.0 - rest;
  }
  // Standard errors from the observed-information inverse.
  {
    Eigen::MatrixXd H(dim, dim);
    for (int c = 0; c < B; ++c)
      for (int d = c; d < B; ++d) {
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i)
          w(i) = P(i, c) * ((c == d ? 1.0 : 0.0) - P(i, d));
        if (c == d) w = w.cwiseMax(1e-10);
        const Eigen::MatrixXd block = X.transpose() * w.asDiagonal() * X;
        H.block(static_cast<Eigen::Index>(c) * k, static_cast<Eigen::Index>(d) * k, k, k) = block;
        if (c != d)
          H.block(static_cast<Eigen::Index>(d) * k, static_cast<Eigen::Index>(c) * k, k, k) =
              block;
      }
    const Eigen::MatrixXd Hinv = H.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
    fit.standard_errors = Hinv.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

// Class probabilities for new rows under a fit_multinomial result.
inline Eigen::MatrixXd predict_multinomial(const GlmFit& fit, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  const int Ka = static_cast<int>(fit.active_classes.size());
  const int B = Ka - 1;
  Eigen::MatrixXd eta(n, B);
  for (int c = 0; c < B; ++c)
    eta.col(c).noalias() = X * fit.coefficients.segment(static_cast<Eigen::Index>(c) * k, k);
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, fit.n_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = (B > 0) ? std::max(0.0, eta.row(i).maxCoeff()) : 0.0;
    double denom = std::exp(-m);
    for (int c = 0; c < B; ++c) denom += std::exp(eta(i, c) - m);
    probs(i, fit.active_classes[0]) = std::exp(-m) / denom;
    for (int c = 0; c < B; ++c)
      probs(i, fit.active_classes[static_cast<std::size_t>(c + 1)]) =
          std::exp(eta(i, c) - m) / denom;
  }
  return probs;
}

}  // namespace synthmetric
