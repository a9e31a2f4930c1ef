#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthmetric/cart.hpp"
#include "synthmetric/dataset.hpp"
#include "synthmetric/design.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/rng.hpp"
#include "synthmetric/stats.hpp"

namespace synthmetric {

enum class SynthMethod { bootstrap, parametric_normal, parametric_rank, cart };

inline std::string to_string(SynthMethod m) {
  switch (m) {
    case SynthMethod::bootstrap: return "bootstrap";
    case SynthMethod::parametric_normal: return "parametric_normal";
    case SynthMethod::parametric_rank: return "parametric_rank";
    case SynthMethod::cart: return "cart";
  }
  throw std::logic_error("unknown synthesis method");
}

inline SynthMethod synth_method_from_string(const std::string& s) {
  if (s == "bootstrap") return SynthMethod::bootstrap;
  if (s == "parametric_normal") return SynthMethod::parametric_normal;
  if (s == "parametric_rank") return SynthMethod::parametric_rank;
  if (s == "cart") return SynthMethod::cart;
  throw std::invalid_argument("unknown synthesis method: " + s);
}

struct SynthesisPlan {
  SynthMethod method = SynthMethod::cart;
  SynthesisMask mask;                    // which columns are replaced
  std::vector<std::string> visit_order;  // empty: mask columns in schema order
  int m = 1;                             // number of synthetic replicates
  std::uint64_t seed = 0;
  TreeConfig tree;                       // cart method only
};

namespace detail {

// Raw design (intercept + numeric values + dummies) over `cols` of `ds`.
inline Eigen::MatrixXd sequential_design(const Dataset& ds, const std::vector<std::size_t>& cols) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n_rows());
  std::vector<Eigen::VectorXd> built;
  std::vector<std::string> names;
  built.push_back(Eigen::VectorXd::Ones(n));
  for (const auto j : cols)
    for (auto& c : encode_variable(ds, j, &names)) built.push_back(std::move(c));
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(built.size()));
  for (std::size_t c = 0; c < built.size(); ++c)
    X.col(static_cast<Eigen::Index>(c)) = built[c];
  return X;
}

// Removes columns that are constant in the fitting design (e.g. dummies of
// levels never observed) from both the fitting and prediction designs.
inline void drop_constant_columns(Eigen::MatrixXd& fit_X, Eigen::MatrixXd& pred_X) {
  std::vector<Eigen::Index> keep = {0};  // intercept
  for (Eigen::Index j = 1; j < fit_X.cols(); ++j)
    if (fit_X.col(j).maxCoeff() != fit_X.col(j).minCoeff()) keep.push_back(j);
  if (keep.size() == static_cast<std::size_t>(fit_X.cols())) return;
  Eigen::MatrixXd f(fit_X.rows(), static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd p(pred_X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    f.col(static_cast<Eigen::Index>(c)) = fit_X.col(keep[c]);
    p.col(static_cast<Eigen::Index>(c)) = pred_X.col(keep[c]);
  }
  fit_X = std::move(f);
  pred_X = std::move(p);
}

inline std::int32_t draw_class(const Eigen::MatrixXd& probs, Eigen::Index row, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::int32_t last = 0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    const double p = probs(row, c);
    if (p <= 0.0) continue;
    cum += p;
    last = static_cast<std::int32_t>(c);
    if (u < cum) return last;
  }
  return last;  // guard against cum < 1 from rounding
}

// Normal scores of y with average ranks for ties, at positions (rank-0.5)/n.
inline Eigen::VectorXd normal_scores(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (y[a] != y[b]) return y[a] < y[b];
    return a < b;
  });
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && y[order[j + 1]] == y[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t)
    z(static_cast<Eigen::Index>(t)) =
        normal_quantile((rank[t] - 0.5) / static_cast<double>(n));
  return z;
}

// Piecewise-linear empirical quantile of `sorted` at probability u, with knots
// at (i+0.5)/n; clamped to the observed range.
inline double empirical_quantile(const std::vector<double>& sorted, double u) {
  const double n = static_cast<double>(sorted.size());
  const double t = u * n - 0.5;
  if (t <= 0.0) return sorted.front();
  if (t >= n - 1.0) return sorted.back();
  const auto j = static_cast<std::size_t>(t);
  const double frac = t - static_cast<double>(j);
  return sorted[j] + frac * (sorted[j + 1] - sorted[j]);
}

}  // namespace detail

// Draws `plan.m` synthetic replicates of the masked columns, visiting them in
// `plan.visit_order` and conditioning each fit on the unsynthesized columns
// plus the columns already visited (models are always fit on the original
// data; predictors for the draws come from the partially synthesized rows).
// Parametric draws plug in the point estimates; no posterior draws are taken.
inline std::vector<Dataset> synthesize(const Dataset& original, const SynthesisPlan& plan) {
  if (plan.m < 1) throw std::invalid_argument("synthesize: m must be >= 1");
  if (original.n_rows() < 2) throw std::invalid_argument("synthesize: need at least 2 rows");
  validate_mask(plan.mask, original.schema());

  std::vector<std::string> order = plan.visit_order;
  if (order.empty()) {
    for (const auto& col : original.schema())
      if (plan.mask.contains(col.name)) order.push_back(col.name);
  } else {
    auto a = order;
    auto b = plan.mask.synthesized_columns;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b)
      throw std::invalid_argument(
          "synthesize: visit_order must cover exactly the synthesized columns");
  }

  const std::size_t n = original.n_rows();
  const Rng root(plan.seed);
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(plan.m));

  for (int rep = 0; rep < plan.m; ++rep) {
    Rng rng = root.substream(static_cast<std::uint64_t>(rep));
    if (plan.method == SynthMethod::cart)
      rng = rng.substream(plan.tree.seed);  // donor-draw stream honors TreeConfig::seed
    Dataset syn = original;

    if (plan.method == SynthMethod::bootstrap) {
      // Each column is resampled with replacement independently of the others,
      // so marginals survive but every cross-column dependency is destroyed.
      for (const auto& name : order) {
        const std::size_t j = original.require_column(name);
        for (std::size_t i = 0; i < n; ++i) {
          const auto donor = static_cast<std::size_t>(rng.uniform_below(n));
          if (original.is_numeric(j))
            syn.numeric(j)[i] = original.numeric(j)[donor];
          else
            syn.codes(j)[i] = original.codes(j)[donor];
        }
      }
      syn.set_role(DatasetRole::synthetic);
      out.push_back(std::move(syn));
      continue;
    }

    std::vector<std::size_t> predictors;
    for (std::size_t j = 0; j < original.n_cols(); ++j)
      if (!plan.mask.contains(original.schema()[j].name)) predictors.push_back(j);

    for (const auto& name : order) {
      const std::size_t j = original.require_column(name);

      if (plan.method == SynthMethod::cart) {
        const FeatureTable fit_feat = make_features(original, predictors);
        const FeatureTable pred_feat = make_features(syn, predictors);
        const bool has_predictors = !predictors.empty();
        if (original.is_numeric(j)) {
          const auto& y = original.numeric(j);
          if (!has_predictors) {
            for (std::size_t i = 0; i < n; ++i)
              syn.numeric(j)[i] = y[rng.uniform_below(n)];
          } else {
            const DecisionTree tree = fit_regression_tree(fit_feat, y, plan.tree);
            for (std::size_t i = 0; i < n; ++i)
              syn.numeric(j)[i] =
                  y[static_cast<std::size_t>(sample_from_leaf(tree, pred_feat, i, rng))];
          }
        } else {
          const auto& y = original.codes(j);
          if (!has_predictors) {
            for (std::size_t i = 0; i < n; ++i)
              syn.codes(j)[i] = y[rng.uniform_below(n)];
          } else {
            const DecisionTree tree = fit_classification_tree(
                fit_feat, y, static_cast<int>(original.schema()[j].levels.size()), plan.tree);
            for (std::size_t i = 0; i < n; ++i)
              syn.codes(j)[i] =
                  y[static_cast<std::size_t>(sample_from_leaf(tree, pred_feat, i, rng))];
          }
        }
        predictors.push_back(j);
        continue;
      }

      // Parametric methods share the design; responses differ by kind.
      Eigen::MatrixXd X = detail::sequential_design(original, predictors);
      Eigen::MatrixXd Xs = detail::sequential_design(syn, predictors);
      detail::drop_constant_columns(X, Xs);

      if (!original.is_numeric(j)) {
        const GlmFit fit = fit_multinomial(
            X, original.codes(j), static_cast<int>(original.schema()[j].levels.size()));
        const Eigen::MatrixXd probs = predict_multinomial(fit, Xs);
        for (std::size_t i = 0; i < n; ++i)
          syn.codes(j)[i] = detail::draw_class(probs, static_cast<Eigen::Index>(i), rng);
      } else if (plan.method == SynthMethod::parametric_normal) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = original.numeric(j)[i];
        const GlmFit fit = fit_linear(X, y);
        const Eigen::VectorXd mu = predict_linear(fit, Xs);
        const double sigma = fit.deviance;
        for (std::size_t i = 0; i < n; ++i)
          syn.numeric(j)[i] = mu(static_cast<Eigen::Index>(i)) + sigma * rng.normal();
      } else {  // parametric_rank
        const Eigen::VectorXd z = detail::normal_scores(original.numeric(j));
        const GlmFit fit = fit_linear(X, z);
        const Eigen::VectorXd mu = predict_linear(fit, Xs);
        const double sigma = fit.deviance;
        std::vector<double> sorted = original.numeric(j);
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) {
          const double zstar = mu(static_cast<Eigen::Index>(i)) + sigma * rng.normal();
          syn.numeric(j)[i] = detail::empirical_quantile(sorted, normal_cdf(zstar));
        }
      }
      predictors.push_back(j);
    }
    syn.set_role(DatasetRole::synthetic);
    out.push_back(std::move(syn));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multivariate-normal generators used by the simulation harness.
// ---------------------------------------------------------------------------

struct MvnSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

inline Eigen::MatrixXd equicorrelation(int dim, double rho) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(dim, dim, rho);
  s.diagonal().setOnes();
  return s;
}

inline Dataset mvn_sample(const MvnSpec& spec, std::size_t n, Rng& rng,
                          const std::string& prefix = "x") {
  const Eigen::Index d = spec.mean.size();
  if (spec.covariance.rows() != d || spec.covariance.cols() != d)
    throw std::invalid_argument("mvn_sample: mean and covariance sizes differ");
  const Eigen::LLT<Eigen::MatrixXd> llt(spec.covariance);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("mvn_sample: covariance is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  std::vector<ColumnSchema> schema;
  for (Eigen::Index j = 0; j < d; ++j)
    schema.push_back({prefix + std::to_string(j + 1), ColumnKind::numeric, {}});
  Dataset ds(schema, n);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
    const Eigen::VectorXd row = spec.mean + L * z;
    for (Eigen::Index j = 0; j < d; ++j) ds.numeric(static_cast<std::size_t>(j))[i] = row(j);
  }
  return ds;
}

namespace detail {

inline MvnSpec sample_moments(const Dataset& ds) {
  const Eigen::Index d = static_cast<Eigen::Index>(ds.n_cols());
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n_rows());
  if (n < 2) throw std::invalid_argument("mvn synthesis: need at least 2 rows");
  Eigen::MatrixXd M(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!ds.is_numeric(static_cast<std::size_t>(j)))
      throw std::invalid_argument("mvn synthesis: all columns must be numeric");
    for (Eigen::Index i = 0; i < n; ++i)
      M(i, j) = ds.numeric(static_cast<std::size_t>(j))[static_cast<std::size_t>(i)];
  }
  MvnSpec spec;
  spec.mean = M.colwise().mean();
  const Eigen::MatrixXd centered = M.rowwise() - spec.mean.transpose();
  spec.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  return spec;
}

}  // namespace detail

// Redraws every column from MVN(sample mean, sample covariance): the correct
// generative model when the data are multivariate normal.
inline Dataset mvn_correct_synthesis(const Dataset& original, Rng& rng) {
  MvnSpec spec = detail::sample_moments(original);
  Dataset out = mvn_sample(spec, original.n_rows(), rng);
  Dataset renamed(original.schema(), original.n_rows());
  for (std::size_t j = 0; j < original.n_cols(); ++j) renamed.numeric(j) = out.numeric(j);
  renamed.set_role(DatasetRole::synthetic);
  return renamed;
}

// Deliberately misspecified variant: keeps the sample means and variances but
// zeroes every covariance, so all dependence between columns is lost.
inline Dataset mvn_incorrect_synthesis(const Dataset& original, Rng& rng) {
  MvnSpec spec = detail::sample_moments(original);
  const Eigen::VectorXd variances = spec.covariance.diagonal();
  spec.covariance = variances.asDiagonal();
  Dataset out = mvn_sample(spec, original.n_rows(), rng);
  Dataset renamed(original.schema(), original.n_rows());
  for (std::size_t j = 0; j < original.n_cols(); ++j) renamed.numeric(j) = out.numeric(j);
  renamed.set_role(DatasetRole::synthetic);
  return renamed;
}

}  // namespace synthmetric
