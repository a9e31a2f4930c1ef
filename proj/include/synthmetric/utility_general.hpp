#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthmetric/cart.hpp"
#include "synthmetric/dataset.hpp"
#include "synthmetric/design.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/rng.hpp"
#include "synthmetric/stats.hpp"

namespace synthmetric {

enum class PropensityModel { logistic, cart };
enum class NullMethod { analytic, permutation, pairwise };

inline std::string to_string(NullMethod m) {
  switch (m) {
    case NullMethod::analytic: return "analytic";
    case NullMethod::permutation: return "permutation";
    case NullMethod::pairwise: return "pairwise";
  }
  throw std::logic_error("unknown null method");
}

struct PropensityModelSpec {
  PropensityModel model = PropensityModel::logistic;
  DesignSpec design;       // logistic propensity models
  TreeConfig tree_config;  // cart propensity models (raw variables as features)
  int max_iter = 25;
  double tol = 1e-8;
};

struct NullEstimate {
  NullMethod method = NullMethod::analytic;
  double mean = 0.0;
  double sd = 0.0;
  int effective_df = 0;  // analytic only
  int replicates = 0;    // permutation draws / synthetic pairs used
};

struct UtilityReport {
  std::size_t n1 = 0, n2 = 0, N = 0;
  double c = 0.0;                        // n2 / N
  int k = 0;                             // design columns incl. intercept (logistic)
  int effective_df = 0;                  // non-intercept columns involving synthesis (logistic)
  std::vector<double> pmse_per_dataset;  // one per synthetic replicate
  double pmse = 0.0;                     // mean over replicates
  NullEstimate null_estimate;
  double ratio = 0.0;                    // pmse / null mean
  double standardized = 0.0;             // (pmse - null mean) / null sd
  double score_diagnostics = 0.0;        // fraction of scores outside the extreme-score band
  bool overfit_warning = false;
  bool separation_warning = false;
  bool root_only_tree = false;
  std::vector<std::string> warnings;
};

struct UtilityOptions {
  NullMethod null_method = NullMethod::analytic;
  SynthesisMask mask;                  // empty set means complete synthesis
  int n_perms = 100;                   // permutation null
  std::uint64_t seed = 0;              // permutation null shuffles
  double score_band_lo = 0.05;         // extreme-score band for the overfit diagnostic
  double score_band_hi = 0.95;
  double overfit_threshold = 0.25;     // warn when the outside-band fraction exceeds this
};

// Mean squared deviation of the propensity scores from c = n2/N.
inline double compute_pmse(std::span<const double> scores, double c) {
  if (scores.empty()) throw std::invalid_argument("compute_pmse: empty score vector");
  if (!(c > 0.0 && c < 1.0)) throw std::invalid_argument("compute_pmse: c must be in (0, 1)");
  double s = 0.0;
  for (const double p : scores) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("compute_pmse: scores must lie in [0, 1]");
    s += (p - c) * (p - c);
  }
  return s / static_cast<double>(scores.size());
}

// Null moments of the pMSE under correct synthesis for a logistic propensity
// model: mean = df*(1-c)^2*c/N and sd = sqrt(2*df)*(1-c)^2*c/N, i.e. the
// moments of ((1-c)^2*c/N) * chi-squared(df). For complete synthesis df = k-1;
// for incomplete synthesis df counts only columns involving synthesized
// variables.
inline NullEstimate analytic_null(int effective_df, std::size_t n1, std::size_t n2) {
  if (effective_df < 0) throw std::invalid_argument("analytic_null: effective_df must be >= 0");
  if (n1 == 0 || n2 == 0) throw std::invalid_argument("analytic_null: need n1, n2 >= 1");
  const double N = static_cast<double>(n1 + n2);
  const double c = static_cast<double>(n2) / N;
  const double scale = (1.0 - c) * (1.0 - c) * c / N;
  NullEstimate est;
  est.method = NullMethod::analytic;
  est.effective_df = effective_df;
  est.mean = static_cast<double>(effective_df) * scale;
  est.sd = std::sqrt(2.0 * static_cast<double>(effective_df)) * scale;
  return est;
}

// Scale s such that the null pMSE is distributed as s * chi-squared(df).
inline double analytic_null_scale(std::size_t n1, std::size_t n2) {
  const double N = static_cast<double>(n1 + n2);
  const double c = static_cast<double>(n2) / N;
  return (1.0 - c) * (1.0 - c) * c / N;
}

namespace detail {

struct ScoredFit {
  std::vector<double> scores;  // propensity scores of the stacked rows
  double c = 0.0;
  int k = 0;             // logistic: design columns incl. intercept
  int effective_df = 0;  // logistic
  bool separation = false;
  bool root_only = false;
};

inline std::vector<std::size_t> all_columns(const Dataset& ds) {
  std::vector<std::size_t> cols(ds.n_cols());
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  return cols;
}

// One original-vs-synthetic propensity fit on the stacked data.
inline ScoredFit fit_propensity(const Dataset& first, const Dataset& second,
                                const SynthesisMask& mask, const PropensityModelSpec& spec) {
  ScoredFit out;
  const std::size_t n1 = first.n_rows();
  const std::size_t n2 = second.n_rows();
  out.c = static_cast<double>(n2) / static_cast<double>(n1 + n2);
  if (spec.model == PropensityModel::logistic) {
    const PropensityDesign d = build_design(first, second, mask, spec.design);
    const GlmFit fit =
        fit_logistic(d.design.values, d.indicator, spec.max_iter, spec.tol);
    out.scores.assign(fit.fitted.data(), fit.fitted.data() + fit.fitted.size());
    out.k = static_cast<int>(d.design.values.cols());
    out.effective_df = d.design.effective_df;
    out.separation = fit.separation;
  } else {
    Dataset a = first;
    Dataset b = second;
    harmonize_levels(a, b);
    const FeatureTable feat = stack_features(a, b, all_columns(a));
    std::vector<std::int32_t> y(n1 + n2, 0);
    std::fill(y.begin() + static_cast<std::ptrdiff_t>(n1), y.end(), 1);
    const DecisionTree tree = fit_classification_tree(feat, y, 2, spec.tree_config);
    out.scores = predict_scores(tree, feat);
    out.root_only = tree.root_only();
  }
  return out;
}

}  // namespace detail

// Null pMSE estimated by refitting the propensity model after shuffling the
// original/synthetic indicator (the stacked predictors stay fixed). Only valid
// for complete synthesis: with unsynthesized columns the stacked rows are not
// exchangeable under the null. With m > 1, each permutation draws one
// synthetic replicate at random. Logistic estimates are halved (see below).
inline NullEstimate permutation_null(const Dataset& original,
                                     const std::vector<Dataset>& synthetics,
                                     const PropensityModelSpec& spec, const SynthesisMask& mask,
                                     int n_perms, Rng& rng) {
  if (synthetics.empty()) throw std::invalid_argument("permutation_null: no synthetic datasets");
  if (n_perms < 20)
    throw std::invalid_argument("permutation_null: n_perms must be at least 20");
  if (!is_complete(mask, original.schema()))
    throw std::invalid_argument(
        "permutation_null: the permutation null is only valid for complete synthesis (every "
        "column synthesized); with unsynthesized columns the shuffled indicator no longer "
        "represents the null. Use the analytic (logistic) or pairwise null instead.");

  const std::size_t m = synthetics.size();
  const std::size_t n1 = original.n_rows();

  // Pre-build one stacked encoding per replicate; permutations only relabel.
  std::vector<Eigen::MatrixXd> designs;
  std::vector<FeatureTable> features;
  std::vector<std::size_t> n2s;
  for (const auto& syn : synthetics) {
    n2s.push_back(syn.n_rows());
    if (spec.model == PropensityModel::logistic) {
      designs.push_back(build_design(original, syn, mask, spec.design).design.values);
    } else {
      Dataset a = original;
      Dataset b = syn;
      harmonize_levels(a, b);
      features.push_back(stack_features(a, b, detail::all_columns(a)));
    }
  }

  std::vector<double> pmses;
  pmses.reserve(static_cast<std::size_t>(n_perms));
  for (int t = 0; t < n_perms; ++t) {
    const std::size_t r = (m > 1) ? static_cast<std::size_t>(rng.uniform_below(m)) : 0;
    const std::size_t N = n1 + n2s[r];
    const double c = static_cast<double>(n2s[r]) / static_cast<double>(N);
    std::vector<std::int32_t> ind(N, 0);
    std::fill(ind.begin() + static_cast<std::ptrdiff_t>(n1), ind.end(), 1);
    for (std::size_t i = N - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i + 1));
      std::swap(ind[i], ind[j]);
    }
    if (spec.model == PropensityModel::logistic) {
      Eigen::VectorXd y(static_cast<Eigen::Index>(N));
      for (std::size_t i = 0; i < N; ++i) y(static_cast<Eigen::Index>(i)) = ind[i];
      const GlmFit fit = fit_logistic(designs[r], y, spec.max_iter, spec.tol);
      pmses.push_back(compute_pmse({fit.fitted.data(), static_cast<std::size_t>(fit.fitted.size())}, c));
    } else {
      const DecisionTree tree = fit_classification_tree(features[r], ind, 2, spec.tree_config);
      const std::vector<double> scores = predict_scores(tree, features[r]);
      pmses.push_back(compute_pmse(scores, c));
    }
  }

  NullEstimate est;
  est.method = NullMethod::permutation;
  est.replicates = n_perms;
  est.mean = mean(pmses);
  est.sd = (pmses.size() > 1) ? stddev(pmses) : 0.0;
  if (spec.model == PropensityModel::logistic) {
    // A permuted split makes both halves random draws from the pooled rows,
    // so the group-mean difference carries two samples' worth of variance.
    // The synthesis null conditions on the original and carries only one
    // (the synthetic replicate's expected moments match the original's by
    // construction), so at n1 = n2 the permuted pMSE estimates twice the
    // null, exactly as the pairwise comparisons do. Tree models are instead
    // dominated by the refit's over-fitting component, which is the same in
    // both settings, so their permuted values estimate the null directly.
    est.mean *= 0.5;
    est.sd *= 0.5;
  }
  return est;
}

// Null pMSE estimated from the m(m-1)/2 pairwise comparisons among synthetic
// replicates. Each pair compares two samples drawn from the same fitted
// model, which mimics correct synthesis even when that model is wrong. For
// logistic models the pair pMSE has twice the single-comparison null mean, so
// mean and sd are halved; CART pair values estimate the null directly.
inline NullEstimate pairwise_null(const std::vector<Dataset>& synthetics,
                                  const PropensityModelSpec& spec, std::size_t original_n1,
                                  const SynthesisMask& mask) {
  if (synthetics.size() < 2)
    throw std::invalid_argument("pairwise_null: need at least 2 synthetic replicates");
  (void)original_n1;  // pairs are synthetic-vs-synthetic; recorded by the caller's report

  std::vector<double> pmses;
  for (std::size_t i = 0; i < synthetics.size(); ++i)
    for (std::size_t j = i + 1; j < synthetics.size(); ++j) {
      const detail::ScoredFit f = detail::fit_propensity(synthetics[i], synthetics[j], mask, spec);
      pmses.push_back(compute_pmse(f.scores, f.c));
    }

  NullEstimate est;
  est.method = NullMethod::pairwise;
  est.replicates = static_cast<int>(pmses.size());
  est.mean = mean(pmses);
  est.sd = (pmses.size() > 1) ? stddev(pmses) : 0.0;
  if (spec.model == PropensityModel::logistic) {
    est.mean *= 0.5;
    est.sd *= 0.5;
  }
  return est;
}

// Full general-utility pipeline: per-replicate pMSE against the original,
// averaged, with the requested null attached and the ratio / standardized
// statistics filled in.
inline UtilityReport general_utility(const Dataset& original,
                                     const std::vector<Dataset>& synthetics,
                                     const PropensityModelSpec& spec,
                                     const UtilityOptions& options) {
  if (synthetics.empty())
    throw std::invalid_argument("general_utility: no synthetic datasets supplied");

  // Shared level lists across the original and every replicate.
  Dataset orig = original;
  std::vector<Dataset> syns = synthetics;
  for (auto& s : syns) harmonize_levels(orig, s);
  for (auto& s : syns)
    for (std::size_t j = 0; j < orig.n_cols(); ++j)
      if (!orig.is_numeric(j)) s.relevel(j, orig.schema()[j].levels);

  SynthesisMask mask = options.mask;
  if (mask.synthesized_columns.empty()) mask = complete_mask(orig);
  mask.m = static_cast<int>(syns.size());
  validate_mask(mask, orig.schema());

  const std::size_t n2 = syns.front().n_rows();
  for (const auto& s : syns)
    if (s.n_rows() != n2)
      throw std::invalid_argument("general_utility: synthetic replicates differ in row count");

  UtilityReport rep;
  rep.n1 = orig.n_rows();
  rep.n2 = n2;
  rep.N = rep.n1 + rep.n2;
  rep.c = static_cast<double>(rep.n2) / static_cast<double>(rep.N);

  std::size_t outside = 0, total_scores = 0;
  bool df_mismatch = false;
  for (std::size_t i = 0; i < syns.size(); ++i) {
    const detail::ScoredFit f = detail::fit_propensity(orig, syns[i], mask, spec);
    rep.pmse_per_dataset.push_back(compute_pmse(f.scores, f.c));
    if (i == 0) {
      rep.k = f.k;
      rep.effective_df = f.effective_df;
    } else if (f.effective_df != rep.effective_df || f.k != rep.k) {
      df_mismatch = true;
      rep.k = std::max(rep.k, f.k);
      rep.effective_df = std::max(rep.effective_df, f.effective_df);
    }
    rep.separation_warning = rep.separation_warning || f.separation;
    rep.root_only_tree = rep.root_only_tree || f.root_only;
    for (const double s : f.scores)
      if (s < options.score_band_lo || s > options.score_band_hi) ++outside;
    total_scores += f.scores.size();
  }
  rep.pmse = mean(rep.pmse_per_dataset);
  rep.score_diagnostics = static_cast<double>(outside) / static_cast<double>(total_scores);
  rep.overfit_warning = rep.score_diagnostics > options.overfit_threshold;

  if (df_mismatch)
    rep.warnings.push_back(
        "replicates produced different design column counts (level sets differ); the largest "
        "effective_df was used for the null");
  if (rep.separation_warning)
    rep.warnings.push_back(
        "quasi-separation detected in at least one propensity fit; scores near 0/1 violate the "
        "null approximation");
  if (rep.overfit_warning)
    rep.warnings.push_back("more than " + std::to_string(options.overfit_threshold * 100) +
                           "% of propensity scores fall outside [" +
                           std::to_string(options.score_band_lo) + ", " +
                           std::to_string(options.score_band_hi) +
                           "]; the propensity model may be overfitting");
  if (rep.root_only_tree)
    rep.warnings.push_back(
        "the propensity tree made no splits, so every score equals c and the pMSE is 0 by "
        "construction; consider loosening the tree controls");

  switch (options.null_method) {
    case NullMethod::analytic:
      if (spec.model != PropensityModel::logistic)
        throw std::invalid_argument(
            "general_utility: the analytic null is only available for logistic propensity "
            "models (CART has no asymptotic null); use a permutation or pairwise null");
      rep.null_estimate = analytic_null(rep.effective_df, rep.n1, rep.n2);
      break;
    case NullMethod::permutation: {
      Rng rng(options.seed);
      rep.null_estimate = permutation_null(orig, syns, spec, mask, options.n_perms, rng);
      break;
    }
    case NullMethod::pairwise:
      if (syns.size() < 2)
        throw std::invalid_argument(
            "general_utility: the pairwise null requires at least 2 synthetic replicates (m >= "
            "2)");
      if (rep.n1 != rep.n2)
        rep.warnings.push_back(
            "pairwise null with n1 != n2: pairs compare equal-sized synthetic replicates, so "
            "the null is calibrated for n1 = n2");
      rep.null_estimate = pairwise_null(syns, spec, rep.n1, mask);
      break;
  }

  if (rep.null_estimate.mean > 0.0) {
    rep.ratio = rep.pmse / rep.null_estimate.mean;
  } else {
    rep.ratio = std::numeric_limits<double>::quiet_NaN();
    rep.warnings.push_back("null mean is zero; ratio undefined");
  }
  if (rep.null_estimate.sd > 0.0) {
    rep.standardized = (rep.pmse - rep.null_estimate.mean) / rep.null_estimate.sd;
  } else {
    rep.standardized = std::numeric_limits<double>::quiet_NaN();
    rep.warnings.push_back("null sd is zero; standardized pMSE undefined");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const NullEstimate& est) {
  nlohmann::json j;
  j["method"] = to_string(est.method);
  j["mean"] = est.mean;
  j["sd"] = est.sd;
  if (est.method == NullMethod::analytic) j["effective_df"] = est.effective_df;
  else j["replicates"] = est.replicates;
  return j;
}

inline nlohmann::json to_json(const UtilityReport& rep) {
  nlohmann::json j;
  j["n1"] = rep.n1;
  j["n2"] = rep.n2;
  j["N"] = rep.N;
  j["c"] = rep.c;
  j["k"] = rep.k;
  j["effective_df"] = rep.effective_df;
  j["pmse_per_dataset"] = rep.pmse_per_dataset;
  j["pmse"] = rep.pmse;
  j["null"] = to_json(rep.null_estimate);
  j["ratio"] = rep.ratio;
  j["standardized"] = rep.standardized;
  j["score_diagnostics"] = rep.score_diagnostics;
  j["separation_warning"] = rep.separation_warning;
  j["overfit_warning"] = rep.overfit_warning;
  j["root_only_tree"] = rep.root_only_tree;
  j["warnings"] = rep.warnings;
  return j;
}

inline std::string render_markdown(const UtilityReport& rep) {
  std::string out;
  out += "| quantity | value |\n|---|---|\n";
  const auto row = [&](const std::string& k, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    out += "| " + k + " | " + buf + " |\n";
  };
  out += "| n1 / n2 | " + std::to_string(rep.n1) + " / " + std::to_string(rep.n2) + " |\n";
  row("c", rep.c);
  row("pMSE", rep.pmse);
  out += "| null method | " + to_string(rep.null_estimate.method) + " |\n";
  row("null mean", rep.null_estimate.mean);
  row("null sd", rep.null_estimate.sd);
  if (rep.null_estimate.method == NullMethod::analytic)
    out += "| effective df | " + std::to_string(rep.null_estimate.effective_df) + " |\n";
  row("pMSE ratio", rep.ratio);
  row("standardized pMSE", rep.standardized);
  row("scores outside band", rep.score_diagnostics);
  for (const auto& w : rep.warnings) out += "\n> warning: " + w + "\n";
  return out;
}

}  // namespace synthmetric
