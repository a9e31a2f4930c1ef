#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synthmetric/dataset.hpp"
#include "synthmetric/design.hpp"
#include "synthmetric/glm.hpp"
#include "synthmetric/stats.hpp"

namespace synthmetric {

// Averaged fractional overlap of two confidence intervals; 1 iff identical,
// negative when disjoint.
inline double interval_overlap(double l_o, double u_o, double l_s, double u_s) {
  if (!(l_o < u_o) || !(l_s < u_s))
    throw std::invalid_argument("interval_overlap: degenerate interval (need l < u)");
  const double over = std::min(u_o, u_s) - std::max(l_o, l_s);
  return 0.5 * (over / (u_o - l_o) + over / (u_s - l_s));
}

// |beta_orig - beta_syn| in units of the original estimate's standard error.
inline double standardized_difference(double beta_orig, double beta_syn, double se_orig) {
  if (!(se_orig > 0.0))
    throw std::invalid_argument("standardized_difference: se_orig must be positive");
  return std::abs(beta_orig - beta_syn) / se_orig;
}

struct CoefficientComparison {
  std::string term;
  double beta_orig = 0.0, se_orig = 0.0;
  double beta_syn = 0.0, se_syn = 0.0;  // across-replicate mean and sqrt(mean variance)
  double ci_orig_lo = 0.0, ci_orig_hi = 0.0;
  double ci_syn_lo = 0.0, ci_syn_hi = 0.0;
  double io = 0.0;
  double std_diff = 0.0;
  bool available = true;  // false when the term was inestimable somewhere
};

struct FitComparison {
  std::vector<CoefficientComparison> coefficients;
  double median_io = 0.0;        // across available non-intercept coefficients
  double median_std_diff = 0.0;
  double level = 0.95;
  int m = 0;
  Family family = Family::gaussian;
  std::vector<std::string> warnings;
};

namespace detail {

struct LabeledFit {
  std::vector<std::string> labels;
  std::vector<double> beta;
  std::vector<double> se;
};

// Fits the formula on one dataset and flattens coefficients to labeled
// entries (multinomial blocks become "level:term" labels).
inline LabeledFit fit_formula(const Dataset& ds, const ModelFormula& formula,
                              const std::vector<Eigen::Index>& keep_cols,
                              const std::string& dataset_label) {
  FormulaData fd = build_formula_data(ds, formula);
  Eigen::MatrixXd X(fd.X.rows(), static_cast<Eigen::Index>(keep_cols.size()));
  std::vector<std::string> names;
  for (std::size_t c = 0; c < keep_cols.size(); ++c) {
    X.col(static_cast<Eigen::Index>(c)) = fd.X.col(keep_cols[c]);
    names.push_back(fd.column_names[static_cast<std::size_t>(keep_cols[c])]);
  }

  LabeledFit out;
  const auto check_converged = [&](const GlmFit& fit) {
    if (!fit.converged)
      throw std::runtime_error("compare_fits: model fit did not converge on " + dataset_label);
  };
  if (formula.family == Family::gaussian) {
    const GlmFit fit = fit_linear(X, fd.y);
    out.labels = names;
    out.beta.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
    out.se.assign(fit.standard_errors.data(),
                  fit.standard_errors.data() + fit.standard_errors.size());
  } else if (formula.family == Family::binomial) {
    const GlmFit fit = fit_logistic(X, fd.y);
    check_converged(fit);
    out.labels = names;
    out.beta.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
    out.se.assign(fit.standard_errors.data(),
                  fit.standard_errors.data() + fit.standard_errors.size());
  } else {
    const GlmFit fit =
        fit_multinomial(X, fd.y_codes, static_cast<int>(fd.y_levels.size()));
    check_converged(fit);
    const Eigen::Index k = X.cols();
    for (std::size_t b = 1; b < fit.active_classes.size(); ++b) {
      const std::string cls = fd.y_levels[static_cast<std::size_t>(fit.active_classes[b])];
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index idx = static_cast<Eigen::Index>(b - 1) * k + j;
        out.labels.push_back(cls + ":" + names[static_cast<std::size_t>(j)]);
        out.beta.push_back(fit.coefficients(idx));
        out.se.push_back(fit.standard_errors(idx));
      }
    }
  }
  return out;
}

inline bool is_intercept_label(const std::string& label) {
  const std::string tag = "(Intercept)";
  return label.size() >= tag.size() &&
         label.compare(label.size() - tag.size(), tag.size(), tag) == 0;
}

}  // namespace detail

// Fits `formula` on the original and on each synthetic replicate, combines the
// replicate estimates (mean coefficient, mean squared standard error), and
// reports per-coefficient interval overlap and standardized difference plus
// their medians across non-intercept coefficients.
inline FitComparison compare_fits(const Dataset& original, const std::vector<Dataset>& synthetics,
                                  const ModelFormula& formula, double level = 0.95) {
  if (synthetics.empty()) throw std::invalid_argument("compare_fits: no synthetic datasets");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("compare_fits: level must be in (0, 1)");

  Dataset orig = original;
  std::vector<Dataset> syns = synthetics;
  for (auto& s : syns) harmonize_levels(orig, s);
  for (auto& s : syns)
    for (std::size_t j = 0; j < orig.n_cols(); ++j)
      if (!orig.is_numeric(j)) s.relevel(j, orig.schema()[j].levels);

  FitComparison cmp;
  cmp.level = level;
  cmp.m = static_cast<int>(syns.size());
  cmp.family = formula.family;

  // A column constant in any dataset is inestimable there; exclude it from
  // every fit (keeping the encodings aligned) and report it as unavailable.
  const FormulaData fd0 = build_formula_data(orig, formula);
  const std::size_t n_cols = fd0.column_names.size();
  std::vector<bool> constant_somewhere(n_cols, false);
  const auto scan = [&](const Dataset& ds) {
    const FormulaData fd = build_formula_data(ds, formula);
    for (Eigen::Index j = 1; j < fd.X.cols(); ++j)
      if (fd.X.col(j).maxCoeff() == fd.X.col(j).minCoeff())
        constant_somewhere[static_cast<std::size_t>(j)] = true;
  };
  scan(orig);
  for (const auto& s : syns) scan(s);

  std::vector<Eigen::Index> keep;
  for (std::size_t j = 0; j < n_cols; ++j)
    if (!constant_somewhere[j]) keep.push_back(static_cast<Eigen::Index>(j));

  const detail::LabeledFit fo = detail::fit_formula(orig, formula, keep, "the original dataset");
  std::vector<detail::LabeledFit> fs;
  for (std::size_t i = 0; i < syns.size(); ++i)
    fs.push_back(detail::fit_formula(syns[i], formula, keep,
                                     "synthetic replicate " + std::to_string(i + 1)));

  const double z = normal_quantile(0.5 * (1.0 + level));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> ios, stds;

  for (std::size_t t = 0; t < fo.labels.size(); ++t) {
    CoefficientComparison cc;
    cc.term = fo.labels[t];
    cc.beta_orig = fo.beta[t];
    cc.se_orig = fo.se[t];

    double qbar = 0.0, vbar = 0.0;
    bool ok = std::isfinite(cc.beta_orig) && std::isfinite(cc.se_orig) && cc.se_orig > 0.0;
    for (const auto& f : fs) {
      // Multinomial fits can drop classes absent from a replicate; match labels.
      const auto it = std::find(f.labels.begin(), f.labels.end(), cc.term);
      if (it == f.labels.end()) {
        ok = false;
        break;
      }
      const std::size_t idx = static_cast<std::size_t>(it - f.labels.begin());
      if (!std::isfinite(f.beta[idx]) || !std::isfinite(f.se[idx])) {
        ok = false;
        break;
      }
      qbar += f.beta[idx];
      vbar += f.se[idx] * f.se[idx];
    }
    if (ok) {
      qbar /= static_cast<double>(fs.size());
      vbar /= static_cast<double>(fs.size());
      cc.beta_syn = qbar;
      cc.se_syn = std::sqrt(vbar);
      cc.ci_orig_lo = cc.beta_orig - z * cc.se_orig;
      cc.ci_orig_hi = cc.beta_orig + z * cc.se_orig;
      cc.ci_syn_lo = cc.beta_syn - z * cc.se_syn;
      cc.ci_syn_hi = cc.beta_syn + z * cc.se_syn;
      if (cc.se_syn > 0.0) {
        cc.io = interval_overlap(cc.ci_orig_lo, cc.ci_orig_hi, cc.ci_syn_lo, cc.ci_syn_hi);
        cc.std_diff = standardized_difference(cc.beta_orig, cc.beta_syn, cc.se_orig);
        if (!detail::is_intercept_label(cc.term)) {
          ios.push_back(cc.io);
          stds.push_back(cc.std_diff);
        }
      } else {
        ok = false;
      }
    }
    if (!ok) {
      cc.available = false;
      cc.beta_syn = cc.se_syn = cc.io = cc.std_diff = nan;
      cc.ci_orig_lo = cc.beta_orig - z * cc.se_orig;
      cc.ci_orig_hi = cc.beta_orig + z * cc.se_orig;
      cc.ci_syn_lo = cc.ci_syn_hi = nan;
      cmp.warnings.push_back("coefficient '" + cc.term +
                             "' is not estimable on every dataset; comparison marked unavailable");
    }
    cmp.coefficients.push_back(std::move(cc));
  }

  // Terms dropped from every fit because some dataset made them constant.
  for (std::size_t j = 1; j < n_cols; ++j) {
    if (!constant_somewhere[j]) continue;
    CoefficientComparison cc;
    cc.term = fd0.column_names[j];
    cc.available = false;
    cc.beta_orig = cc.se_orig = cc.beta_syn = cc.se_syn = nan;
    cc.ci_orig_lo = cc.ci_orig_hi = cc.ci_syn_lo = cc.ci_syn_hi = nan;
    cc.io = cc.std_diff = nan;
    cmp.warnings.push_back("term '" + cc.term +
                           "' is constant in at least one dataset and was excluded");
    cmp.coefficients.push_back(std::move(cc));
  }

  if (ios.empty()) {
    cmp.median_io = cmp.median_std_diff = nan;
    cmp.warnings.push_back("no available non-intercept coefficients; medians undefined");
  } else {
    cmp.median_io = median(ios);
    cmp.median_std_diff = median(stds);
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const FitComparison& cmp) {
  nlohmann::json j;
  j["level"] = cmp.level;
  j["m"] = cmp.m;
  j["median_io"] = cmp.median_io;
  j["median_std_diff"] = cmp.median_std_diff;
  j["warnings"] = cmp.warnings;
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : cmp.coefficients) {
    nlohmann::json e;
    e["term"] = c.term;
    e["available"] = c.available;
    e["beta_orig"] = c.beta_orig;
    e["se_orig"] = c.se_orig;
    e["beta_syn"] = c.beta_syn;
    e["se_syn"] = c.se_syn;
    e["ci_orig"] = {c.ci_orig_lo, c.ci_orig_hi};
    e["ci_syn"] = {c.ci_syn_lo, c.ci_syn_hi};
    e["io"] = c.io;
    e["std_diff"] = c.std_diff;
    j["coefficients"].push_back(std::move(e));
  }
  return j;
}

inline std::string render_markdown(const FitComparison& cmp) {
  std::string out;
  out +=
      "| term | beta (orig) | se (orig) | beta (syn) | se (syn) | IO | std diff |\n"
      "|---|---|---|---|---|---|---|\n";
  const auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const auto& c : cmp.coefficients) {
    if (!c.available) {
      out += "| " + c.term + " | — | — | — | — | — | — |\n";
      continue;
    }
    out += "| " + c.term + " | " + num(c.beta_orig) + " | " + num(c.se_orig) + " | " +
           num(c.beta_syn) + " | " + num(c.se_syn) + " | " + num(c.io) + " | " +
           num(c.std_diff) + " |\n";
  }
  out += "\nmedian IO = " + num(cmp.median_io) +
         ", median standardized difference = " + num(cmp.median_std_diff) + " (m = " +
         std::to_string(cmp.m) + ", level = " + num(cmp.level) + ")\n";
  for (const auto& w : cmp.warnings) out += "\n> warning: " + w + "\n";
  return out;
}

}  // namespace synthmetric
