#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthmetric/dataset.hpp"

namespace synthmetric {

enum class Family { gaussian, binomial, multinomial };

struct FormulaTerm {
  std::string a;
  std::string b;  // empty for a main effect; set for the interaction a:b
  bool is_interaction() const { return !b.empty(); }
};

struct ModelFormula {
  std::string response;
  std::vector<FormulaTerm> terms;
  Family family = Family::gaussian;
};

// Parses `response ~ term (+ term)*` where a term is a variable name or a
// two-way interaction `name:name`. Whitespace-insensitive. Errors carry the
// 1-based character position of the offending token.
inline ModelFormula parse_formula(const std::string& text) {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) {
    throw std::invalid_argument("formula error at position " + std::to_string(pos + 1) + ": " +
                                what + " in \"" + text + "\"");
  };
  const auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  const auto read_name = [&]() -> std::string {
    skip_ws();
    const std::size_t start = pos;
    if (pos >= text.size()) fail("expected a variable name, found end of input");
    const unsigned char first = static_cast<unsigned char>(text[pos]);
    if (!(std::isalpha(first) || first == '_')) fail("expected a variable name");
    ++pos;
    while (pos < text.size()) {
      const unsigned char ch = static_cast<unsigned char>(text[pos]);
      if (std::isalnum(ch) || ch == '_' || ch == '.') ++pos;
      else break;
    }
    return text.substr(start, pos - start);
  };

  ModelFormula f;
  f.response = read_name();
  skip_ws();
  if (pos >= text.size() || text[pos] != '~') fail("expected '~' after the response");
  ++pos;
  for (;;) {
    FormulaTerm term;
    term.a = read_name();
    skip_ws();
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      term.b = read_name();
      skip_ws();
    }
    f.terms.push_back(std::move(term));
    if (pos >= text.size()) break;
    if (text[pos] != '+') fail("expected '+' between terms");
    ++pos;
  }
  if (f.terms.empty()) fail("formula has no terms");
  return f;
}

// ---------------------------------------------------------------------------
// Propensity design: intercept + main effects + interactions up to a configured
// order (optionally squares of numeric variables) over the stacked rows of an
// original and a synthetic dataset.
// ---------------------------------------------------------------------------

struct DesignSpec {
  int interaction_order = 2;           // 1, 2 or 3
  bool include_squares = false;        // squares of numeric variables
  bool standardize_numeric = true;     // center/scale numeric mains on the stacked data
  std::size_t max_cells = 200'000'000; // rows*columns budget before allocation
};

struct DesignMatrix {
  Eigen::MatrixXd values;                    // N x k, column 0 is the intercept
  std::vector<std::string> column_names;
  std::vector<bool> involves_synthesized;    // per column; intercept is false
  int effective_df = 0;                      // non-intercept columns touching a synthesized variable
  std::vector<std::string> dropped_constant; // names of constant columns removed
};

struct PropensityDesign {
  DesignMatrix design;
  Eigen::VectorXd indicator;  // 0 = original row, 1 = synthetic row
  std::size_t n1 = 0, n2 = 0;
};

namespace detail {

struct BaseEncoding {
  std::string var;                      // source variable
  std::vector<Eigen::VectorXd> cols;    // one column per dummy / numeric value
  std::vector<std::string> names;
  bool synthesized = false;
};

inline std::vector<BaseEncoding> encode_stacked(const Dataset& a, const Dataset& b,
                                                const SynthesisMask& mask, bool standardize) {
  const std::size_t n1 = a.n_rows();
  const std::size_t n2 = b.n_rows();
  const Eigen::Index N = static_cast<Eigen::Index>(n1 + n2);
  std::vector<BaseEncoding> out;
  for (std::size_t j = 0; j < a.n_cols(); ++j) {
    const auto& col = a.schema()[j];
    BaseEncoding enc;
    enc.var = col.name;
    enc.synthesized = mask.contains(col.name);
    if (col.kind == ColumnKind::numeric) {
      Eigen::VectorXd v(N);
      for (std::size_t i = 0; i < n1; ++i) v(static_cast<Eigen::Index>(i)) = a.numeric(j)[i];
      for (std::size_t i = 0; i < n2; ++i) v(static_cast<Eigen::Index>(n1 + i)) = b.numeric(j)[i];
      if (standardize) {
        const double m = v.mean();
        double sd = std::sqrt((v.array() - m).square().sum() / std::max<double>(1.0, N - 1));
        if (!(sd > 0.0)) sd = 1.0;  // constant column; dropped later
        v = (v.array() - m) / sd;
      }
      enc.cols.push_back(std::move(v));
      enc.names.push_back(col.name);
    } else {
      // L-1 dummies against the first level.
      for (std::size_t l = 1; l < col.levels.size(); ++l) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(N);
        const auto code = static_cast<std::int32_t>(l);
        for (std::size_t i = 0; i < n1; ++i)
          if (a.codes(j)[i] == code) v(static_cast<Eigen::Index>(i)) = 1.0;
        for (std::size_t i = 0; i < n2; ++i)
          if (b.codes(j)[i] == code) v(static_cast<Eigen::Index>(n1 + i)) = 1.0;
        enc.cols.push_back(std::move(v));
        enc.names.push_back(col.name + "=" + col.levels[l]);
      }
    }
    out.push_back(std::move(enc));
  }
  return out;
}

}  // namespace detail

inline PropensityDesign build_design(const Dataset& original, const Dataset& synthetic,
                                     const SynthesisMask& mask, const DesignSpec& spec) {
  if (spec.interaction_order < 1 || spec.interaction_order > 3)
    throw std::invalid_argument("design: interaction_order must be 1, 2 or 3");
  if (original.n_rows() == 0 || synthetic.n_rows() == 0)
    throw std::invalid_argument("design: both datasets must be non-empty");
  if (!mask.synthesized_columns.empty()) validate_mask(mask, original.schema());

  Dataset a = original;
  Dataset b = synthetic;
  harmonize_levels(a, b);

  const std::size_t n1 = a.n_rows();
  const std::size_t n2 = b.n_rows();
  const Eigen::Index N = static_cast<Eigen::Index>(n1 + n2);
  const auto base = detail::encode_stacked(a, b, mask, spec.standardize_numeric);
  const std::size_t p = base.size();

  struct Pending {
    Eigen::VectorXd col;
    std::string name;
    bool synth;
  };
  std::vector<Pending> cols;
  const auto push = [&](Eigen::VectorXd v, std::string name, bool synth) {
    cols.push_back({std::move(v), std::move(name), synth});
  };

  for (const auto& e : base)
    for (std::size_t c = 0; c < e.cols.size(); ++c) push(e.cols[c], e.names[c], e.synthesized);

  if (spec.include_squares) {
    for (std::size_t j = 0; j < p; ++j) {
      const auto& col = a.schema()[j];
      if (col.kind != ColumnKind::numeric) continue;
      push(base[j].cols[0].array().square().matrix(), base[j].names[0] + "^2",
           base[j].synthesized);
    }
  }

  if (spec.interaction_order >= 2) {
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j)
        for (std::size_t ci = 0; ci < base[i].cols.size(); ++ci)
          for (std::size_t cj = 0; cj < base[j].cols.size(); ++cj)
            push((base[i].cols[ci].array() * base[j].cols[cj].array()).matrix(),
                 base[i].names[ci] + ":" + base[j].names[cj],
                 base[i].synthesized || base[j].synthesized);
  }
  if (spec.interaction_order >= 3) {
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j)
        for (std::size_t l = j + 1; l < p; ++l)
          for (std::size_t ci = 0; ci < base[i].cols.size(); ++ci)
            for (std::size_t cj = 0; cj < base[j].cols.size(); ++cj)
              for (std::size_t cl = 0; cl < base[l].cols.size(); ++cl)
                push((base[i].cols[ci].array() * base[j].cols[cj].array() *
                      base[l].cols[cl].array())
                         .matrix(),
                     base[i].names[ci] + ":" + base[j].names[cj] + ":" + base[l].names[cl],
                     base[i].synthesized || base[j].synthesized || base[l].synthesized);
  }

  if (static_cast<std::size_t>(N) * (cols.size() + 1) > spec.max_cells)
    throw std::invalid_argument("design: N*k = " +
                                std::to_string(static_cast<std::size_t>(N) * (cols.size() + 1)) +
                                " cells exceeds the memory budget of " +
                                std::to_string(spec.max_cells));

  PropensityDesign out;
  out.n1 = n1;
  out.n2 = n2;
  out.indicator = Eigen::VectorXd::Zero(N);
  out.indicator.tail(static_cast<Eigen::Index>(n2)).setOnes();

  std::vector<const Pending*> kept;
  for (const auto& c : cols) {
    if (c.col.maxCoeff() == c.col.minCoeff())
      out.design.dropped_constant.push_back(c.name);
    else
      kept.push_back(&c);
  }

  out.design.values.resize(N, static_cast<Eigen::Index>(kept.size() + 1));
  out.design.values.col(0).setOnes();
  out.design.column_names.push_back("(Intercept)");
  out.design.involves_synthesized.push_back(false);
  int eff = 0;
  for (std::size_t c = 0; c < kept.size(); ++c) {
    out.design.values.col(static_cast<Eigen::Index>(c + 1)) = kept[c]->col;
    out.design.column_names.push_back(kept[c]->name);
    out.design.involves_synthesized.push_back(kept[c]->synth);
    if (kept[c]->synth) ++eff;
  }
  out.design.effective_df = eff;
  return out;
}

// ---------------------------------------------------------------------------
// Formula design over a single dataset: intercept + raw main effects (dummies
// for categorical variables) + requested two-way products. Coefficients keep
// the variables' original scale so fits on different datasets are comparable.
// ---------------------------------------------------------------------------

struct FormulaData {
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
  Eigen::VectorXd y;                   // gaussian / binomial (0-1) response
  std::vector<std::int32_t> y_codes;   // multinomial response codes
  std::vector<std::string> y_levels;   // multinomial class labels
};

namespace detail {

inline std::vector<Eigen::VectorXd> encode_variable(const Dataset& ds, std::size_t j,
                                                    std::vector<std::string>* names) {
  const auto& col = ds.schema()[j];
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n_rows());
  std::vector<Eigen::VectorXd> cols;
  if (col.kind == ColumnKind::numeric) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = ds.numeric(j)[static_cast<std::size_t>(i)];
    cols.push_back(std::move(v));
    names->push_back(col.name);
  } else {
    for (std::size_t l = 1; l < col.levels.size(); ++l) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i)
        if (ds.codes(j)[static_cast<std::size_t>(i)] == static_cast<std::int32_t>(l)) v(i) = 1.0;
      cols.push_back(std::move(v));
      names->push_back(col.name + "=" + col.levels[l]);
    }
  }
  return cols;
}

}  // namespace detail

inline FormulaData build_formula_data(const Dataset& ds, const ModelFormula& formula) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n_rows());
  if (n == 0) throw std::invalid_argument("formula design: dataset is empty");
  const std::size_t yj = ds.require_column(formula.response);

  FormulaData out;
  if (formula.family == Family::multinomial) {
    if (ds.is_numeric(yj))
      throw std::invalid_argument("formula: multinomial response '" + formula.response +
                                  "' must be categorical");
    out.y_codes = ds.codes(yj);
    out.y_levels = ds.schema()[yj].levels;
  } else if (formula.family == Family::binomial) {
    out.y.resize(n);
    if (ds.is_numeric(yj)) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = ds.numeric(yj)[static_cast<std::size_t>(i)];
        if (v != 0.0 && v != 1.0)
          throw std::invalid_argument("formula: numeric binomial response must be 0/1");
        out.y(i) = v;
      }
    } else {
      if (ds.schema()[yj].levels.size() != 2)
        throw std::invalid_argument("formula: categorical binomial response '" +
                                    formula.response + "' must have exactly 2 levels");
      for (Eigen::Index i = 0; i < n; ++i)
        out.y(i) = (ds.codes(yj)[static_cast<std::size_t>(i)] == 1) ? 1.0 : 0.0;
    }
  } else {
    if (!ds.is_numeric(yj))
      throw std::invalid_argument("formula: gaussian response '" + formula.response +
                                  "' must be numeric");
    out.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.y(i) = ds.numeric(yj)[static_cast<std::size_t>(i)];
  }

  std::vector<Eigen::VectorXd> cols;
  out.column_names.push_back("(Intercept)");
  cols.push_back(Eigen::VectorXd::Ones(n));
  for (const auto& term : formula.terms) {
    const std::size_t ja = ds.require_column(term.a);
    if (term.a == formula.response || term.b == formula.response)
      throw std::invalid_argument("formula: response '" + formula.response +
                                  "' cannot appear on the right-hand side");
    std::vector<std::string> na;
    auto ca = detail::encode_variable(ds, ja, &na);
    if (!term.is_interaction()) {
      for (std::size_t c = 0; c < ca.size(); ++c) {
        cols.push_back(std::move(ca[c]));
        out.column_names.push_back(na[c]);
      }
    } else {
      const std::size_t jb = ds.require_column(term.b);
      std::vector<std::string> nb;
      const auto cb = detail::encode_variable(ds, jb, &nb);
      for (std::size_t i = 0; i < ca.size(); ++i)
        for (std::size_t j = 0; j < cb.size(); ++j) {
          cols.push_back((ca[i].array() * cb[j].array()).matrix());
          out.column_names.push_back(na[i] + ":" + nb[j]);
        }
    }
  }

  out.X.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    out.X.col(static_cast<Eigen::Index>(c)) = cols[c];
  return out;
}

}  // namespace synthmetric
