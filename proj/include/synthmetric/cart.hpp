#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthmetric/dataset.hpp"
#include "synthmetric/rng.hpp"

namespace synthmetric {

struct TreeConfig {
  int min_leaf = 20;                // minimum rows in each child
  int max_depth = 30;
  double complexity = 1e-4;         // required impurity decrease, relative to the root's
  std::uint64_t seed = 0;           // donor sampling only; fitting is deterministic
  int max_exhaustive_levels = 10;   // categorical split search: exhaustive below, one-vs-rest above
};

// Feature view used for tree fitting and routing; rows are implicit indices.
struct FeatureColumn {
  bool categorical = false;
  std::vector<double> values;       // numeric
  std::vector<std::int32_t> codes;  // categorical
  std::int32_t n_levels = 0;
};
using FeatureTable = std::vector<FeatureColumn>;

inline std::size_t feature_rows(const FeatureTable& f) {
  if (f.empty()) throw std::invalid_argument("feature table has no columns");
  return f[0].categorical ? f[0].codes.size() : f[0].values.size();
}

inline FeatureTable make_features(const Dataset& ds, const std::vector<std::size_t>& cols) {
  FeatureTable out;
  for (const auto j : cols) {
    FeatureColumn f;
    if (ds.is_numeric(j)) {
      f.values = ds.numeric(j);
    } else {
      f.categorical = true;
      f.codes = ds.codes(j);
      f.n_levels = static_cast<std::int32_t>(ds.schema()[j].levels.size());
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Stacks the same columns of two datasets (original rows first). Level lists
// must already be harmonized.
inline FeatureTable stack_features(const Dataset& a, const Dataset& b,
                                   const std::vector<std::size_t>& cols) {
  FeatureTable out;
  for (const auto j : cols) {
    const auto& ca = a.schema()[j];
    const auto& cb = b.schema()[j];
    if (ca.name != cb.name || ca.kind != cb.kind || ca.levels != cb.levels)
      throw std::invalid_argument("stack_features: datasets are not harmonized at column '" +
                                  ca.name + "'");
    FeatureColumn f;
    if (ca.kind == ColumnKind::numeric) {
      f.values = a.numeric(j);
      f.values.insert(f.values.end(), b.numeric(j).begin(), b.numeric(j).end());
    } else {
      f.categorical = true;
      f.codes = a.codes(j);
      f.codes.insert(f.codes.end(), b.codes(j).begin(), b.codes(j).end());
      f.n_levels = static_cast<std::int32_t>(ca.levels.size());
    }
    out.push_back(std::move(f));
  }
  return out;
}

struct TreeNode {
  int feature = -1;                        // -1: leaf
  double threshold = 0.0;                  // numeric split: x <= threshold goes left
  std::vector<std::int32_t> left_codes;    // categorical split membership (codes seen at fit time)
  std::vector<std::int32_t> right_codes;
  bool larger_child_left = false;          // routing for codes unseen at this node
  int left = -1, right = -1;
  int n = 0;
  double value = 0.0;                      // regression mean / binary class-1 proportion
  std::vector<double> class_probs;         // classification leaves
  std::vector<int> donors;                 // leaf training rows
};

// Greedy binary decision tree. Splits maximize impurity decrease (Gini for
// classification, sum of squared errors for regression); ties break toward the
// lowest feature index, then the lowest threshold / first candidate subset, so
// fits are deterministic. Categorical splits search all subsets when the node
// sees few levels and one-level-vs-rest otherwise.
class DecisionTree {
 public:
  static DecisionTree fit_classification(const FeatureTable& features,
                                         const std::vector<std::int32_t>& y, int n_classes,
                                         const TreeConfig& cfg) {
    if (n_classes < 2) throw std::invalid_argument("tree: need at least 2 classes");
    for (const auto c : y)
      if (c < 0 || c >= n_classes) throw std::invalid_argument("tree: class code out of range");
    DecisionTree t;
    t.classification_ = true;
    t.n_classes_ = n_classes;
    t.fit(features, nullptr, &y, cfg);
    return t;
  }

  static DecisionTree fit_regression(const FeatureTable& features, const std::vector<double>& y,
                                     const TreeConfig& cfg) {
    DecisionTree t;
    t.classification_ = false;
    t.fit(features, &y, nullptr, cfg);
    return t;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  bool is_classification() const { return classification_; }
  int n_classes() const { return n_classes_; }
  bool root_only() const { return nodes_.size() == 1; }
  int n_leaves() const {
    int c = 0;
    for (const auto& n : nodes_)
      if (n.feature < 0) ++c;
    return c;
  }

  // Index of the leaf that `row` of `features` falls into.
  int route(const FeatureTable& features, std::size_t row) const {
    int cur = 0;
    for (;;) {
      const TreeNode& nd = nodes_[static_cast<std::size_t>(cur)];
      if (nd.feature < 0) return cur;
      const auto& f = features[static_cast<std::size_t>(nd.feature)];
      bool go_left;
      if (!f.categorical) {
        go_left = f.values[row] <= nd.threshold;
      } else {
        const std::int32_t code = f.codes[row];
        if (std::binary_search(nd.left_codes.begin(), nd.left_codes.end(), code))
          go_left = true;
        else if (std::binary_search(nd.right_codes.begin(), nd.right_codes.end(), code))
          go_left = false;
        else
          go_left = nd.larger_child_left;  // level unseen when this node was fit
      }
      cur = go_left ? nd.left : nd.right;
    }
  }

  double predict_value(const FeatureTable& features, std::size_t row) const {
    return nodes_[static_cast<std::size_t>(route(features, row))].value;
  }

 private:
  void fit(const FeatureTable& features, const std::vector<double>* yr,
           const std::vector<std::int32_t>* yc, const TreeConfig& cfg) {
    const std::size_t n = feature_rows(features);
    const std::size_t ny = classification_ ? yc->size() : yr->size();
    if (n != ny) throw std::invalid_argument("tree: features and response sizes differ");
    if (n == 0) throw std::invalid_argument("tree: empty training data");
    if (cfg.min_leaf < 1) throw std::invalid_argument("tree: min_leaf must be >= 1");

    std::vector<int> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    const double root_impurity = impurity(rows, yr, yc);
    nodes_.clear();
    nodes_.emplace_back();
    grow(0, std::move(rows), 0, root_impurity, features, yr, yc, cfg);
  }

  double impurity(const std::vector<int>& rows, const std::vector<double>* yr,
                  const std::vector<std::int32_t>* yc) const {
    const double n = static_cast<double>(rows.size());
    if (classification_) {
      std::vector<double> cnt(static_cast<std::size_t>(n_classes_), 0.0);
      for (const int r : rows) ++cnt[static_cast<std::size_t>((*yc)[static_cast<std::size_t>(r)])];
      double ss = 0.0;
      for (const double c : cnt) ss += c * c;
      return n - ss / n;  // n * Gini
    }
    double s = 0.0, s2 = 0.0;
    for (const int r : rows) {
      const double v = (*yr)[static_cast<std::size_t>(r)];
      s += v;
      s2 += v * v;
    }
    return s2 - s * s / n;  // sum of squared errors around the mean
  }

  struct Split {
    double decrease = -1.0;
    int feature = -1;
    double threshold = 0.0;
    std::vector<std::int32_t> left_codes, right_codes;
  };

  void grow(int node_idx, std::vector<int> rows, int depth, double root_impurity,
            const FeatureTable& features, const std::vector<double>* yr,
            const std::vector<std::int32_t>* yc, const TreeConfig& cfg) {
    TreeNode& node = nodes_[static_cast<std::size_t>(node_idx)];
    node.n = static_cast<int>(rows.size());
    set_leaf_stats(node, rows, yr, yc);

    const double node_imp = impurity(rows, yr, yc);
    const bool can_split = depth < cfg.max_depth &&
                           rows.size() >= 2 * static_cast<std::size_t>(cfg.min_leaf) &&
                           node_imp > 1e-12;
    Split best;
    if (can_split) best = find_split(rows, features, yr, yc, cfg);

    const double min_decrease = std::max(cfg.complexity * root_impurity, 1e-12);
    if (best.feature < 0 || best.decrease < min_decrease) {
      node.donors = std::move(rows);
      return;
    }

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    const auto& f = features[static_cast<std::size_t>(best.feature)];
    for (const int r : rows) {
      bool go_left;
      if (!f.categorical) {
        go_left = f.values[static_cast<std::size_t>(r)] <= best.threshold;
      } else {
        go_left = std::binary_search(best.left_codes.begin(), best.left_codes.end(),
                                     f.codes[static_cast<std::size_t>(r)]);
      }
      (go_left ? left_rows : right_rows).push_back(r);
    }

    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left_codes = std::move(best.left_codes);
    node.right_codes = std::move(best.right_codes);
    node.larger_child_left = left_rows.size() >= right_rows.size();
    rows.clear();
    rows.shrink_to_fit();

    const int li = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const int ri = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[static_cast<std::size_t>(node_idx)].left = li;
    nodes_[static_cast<std::size_t>(node_idx)].right = ri;
    grow(li, std::move(left_rows), depth + 1, root_impurity, features, yr, yc, cfg);
    grow(ri, std::move(right_rows), depth + 1, root_impurity, features, yr, yc, cfg);
  }

  void set_leaf_stats(TreeNode& node, const std::vector<int>& rows, const std::vector<double>* yr,
                      const std::vector<std::int32_t>* yc) const {
    const double n = static_cast<double>(rows.size());
    if (classification_) {
      node.class_probs.assign(static_cast<std::size_t>(n_classes_), 0.0);
      for (const int r : rows)
        node.class_probs[static_cast<std::size_t>((*yc)[static_cast<std::size_t>(r)])] += 1.0;
      for (auto& p : node.class_probs) p /= n;
      node.value = (n_classes_ >= 2) ? node.class_probs[1] : 0.0;
    } else {
      double s = 0.0;
      for (const int r : rows) s += (*yr)[static_cast<std::size_t>(r)];
      node.value = s / n;
    }
  }

  Split find_split(const std::vector<int>& rows, const FeatureTable& features,
                   const std::vector<double>* yr, const std::vector<std::int32_t>* yc,
                   const TreeConfig& cfg) const {
    Split best;
    const double parent_imp = impurity(rows, yr, yc);
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      const auto& f = features[fi];
      if (!f.categorical)
        numeric_split(rows, f, static_cast<int>(fi), parent_imp, yr, yc, cfg, &best);
      else
        categorical_split(rows, f, static_cast<int>(fi), parent_imp, yr, yc, cfg, &best);
    }
    return best;
  }

  // Children impurity sum for class-count / moment accumulators.
  static double gini_part(const std::vector<double>& cnt, double n) {
    if (n <= 0.0) return 0.0;
    double ss = 0.0;
    for (const double c : cnt) ss += c * c;
    return n - ss / n;
  }
  static double sse_part(double s, double s2, double n) {
    if (n <= 0.0) return 0.0;
    return s2 - s * s / n;
  }

  void numeric_split(const std::vector<int>& rows, const FeatureColumn& f, int fi,
                     double parent_imp, const std::vector<double>* yr,
                     const std::vector<std::int32_t>* yc, const TreeConfig& cfg,
                     Split* best) const {
    std::vector<int> order = rows;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double va = f.values[static_cast<std::size_t>(a)];
      const double vb = f.values[static_cast<std::size_t>(b)];
      if (va != vb) return va < vb;
      return a < b;
    });
    const std::size_t n = order.size();

    std::vector<double> lcnt, rcnt;
    double ls = 0.0, ls2 = 0.0, rs = 0.0, rs2 = 0.0;
    if (classification_) {
      lcnt.assign(static_cast<std::size_t>(n_classes_), 0.0);
      rcnt.assign(static_cast<std::size_t>(n_classes_), 0.0);
      for (const int r : order)
        ++rcnt[static_cast<std::size_t>((*yc)[static_cast<std::size_t>(r)])];
    } else {
      for (const int r : order) {
        const double v = (*yr)[static_cast<std::size_t>(r)];
        rs += v;
        rs2 += v * v;
      }
    }

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const int r = order[i];
      if (classification_) {
        const auto c = static_cast<std::size_t>((*yc)[static_cast<std::size_t>(r)]);
        ++lcnt[c];
        --rcnt[c];
      } else {
        const double v = (*yr)[static_cast<std::size_t>(r)];
        ls += v;
        ls2 += v * v;
        rs -= v;
        rs2 -= v * v;
      }
      const double va = f.values[static_cast<std::size_t>(order[i])];
      const double vb = f.values[static_cast<std::size_t>(order[i + 1])];
      if (va == vb) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < static_cast<std::size_t>(cfg.min_leaf) ||
          nr < static_cast<std::size_t>(cfg.min_leaf))
        continue;
      const double child_imp =
          classification_
              ? gini_part(lcnt, static_cast<double>(nl)) + gini_part(rcnt, static_cast<double>(nr))
              : sse_part(ls, ls2, static_cast<double>(nl)) +
                    sse_part(rs, rs2, static_cast<double>(nr));
      const double decrease = parent_imp - child_imp;
      if (decrease > best->decrease) {
        best->decrease = decrease;
        best->feature = fi;
        best->threshold = va + 0.5 * (vb - va);
        best->left_codes.clear();
        best->right_codes.clear();
      }
    }
  }

  void categorical_split(const std::vector<int>& rows, const FeatureColumn& f, int fi,
                         double parent_imp, const std::vector<double>* yr,
                         const std::vector<std::int32_t>* yc, const TreeConfig& cfg,
                         Split* best) const {
    // Per-level tallies over the node's rows.
    const std::size_t L = static_cast<std::size_t>(f.n_levels);
    std::vector<double> ln(L, 0.0);
    std::vector<std::vector<double>> lcls;
    std::vector<double> lsum(L, 0.0), lsum2(L, 0.0);
    if (classification_) lcls.assign(L, std::vector<double>(static_cast<std::size_t>(n_classes_), 0.0));
    for (const int r : rows) {
      const auto code = static_cast<std::size_t>(f.codes[static_cast<std::size_t>(r)]);
      ln[code] += 1.0;
      if (classification_) {
        lcls[code][static_cast<std::size_t>((*yc)[static_cast<std::size_t>(r)])] += 1.0;
      } else {
        const double v = (*yr)[static_cast<std::size_t>(r)];
        lsum[code] += v;
        lsum2[code] += v * v;
      }
    }
    std::vector<std::int32_t> present;
    for (std::size_t l = 0; l < L; ++l)
      if (ln[l] > 0.0) present.push_back(static_cast<std::int32_t>(l));
    const std::size_t P = present.size();
    if (P < 2) return;

    const double n_total = static_cast<double>(rows.size());
    const auto eval_subset = [&](std::uint64_t mask) {
      // Bit b of mask: present[b+1] goes left; present[0] always goes left.
      double nl = ln[static_cast<std::size_t>(present[0])];
      std::vector<double> cl, cr;
      double sl = 0.0, sl2 = 0.0;
      if (classification_) {
        cl = lcls[static_cast<std::size_t>(present[0])];
      } else {
        sl = lsum[static_cast<std::size_t>(present[0])];
        sl2 = lsum2[static_cast<std::size_t>(present[0])];
      }
      std::vector<std::int32_t> left = {present[0]}, right;
      for (std::size_t b = 0; b + 1 < P; ++b) {
        const auto code = static_cast<std::size_t>(present[b + 1]);
        if (mask & (1ULL << b)) {
          nl += ln[code];
          left.push_back(present[b + 1]);
          if (classification_)
            for (std::size_t c = 0; c < cl.size(); ++c) cl[c] += lcls[code][c];
          else {
            sl += lsum[code];
            sl2 += lsum2[code];
          }
        } else {
          right.push_back(present[b + 1]);
        }
      }
      const double nr = n_total - nl;
      if (right.empty()) return;
      if (nl < cfg.min_leaf || nr < cfg.min_leaf) return;
      double child_imp;
      if (classification_) {
        cr.assign(cl.size(), 0.0);
        for (const auto code : right)
          for (std::size_t c = 0; c < cr.size(); ++c)
            cr[c] += lcls[static_cast<std::size_t>(code)][c];
        child_imp = gini_part(cl, nl) + gini_part(cr, nr);
      } else {
        double sr = 0.0, sr2 = 0.0;
        for (const auto code : right) {
          sr += lsum[static_cast<std::size_t>(code)];
          sr2 += lsum2[static_cast<std::size_t>(code)];
        }
        child_imp = sse_part(sl, sl2, nl) + sse_part(sr, sr2, nr);
      }
      const double decrease = parent_imp - child_imp;
      if (decrease > best->decrease) {
        best->decrease = decrease;
        best->feature = fi;
        best->threshold = 0.0;
        std::sort(left.begin(), left.end());
        std::sort(right.begin(), right.end());
        best->left_codes = std::move(left);
        best->right_codes = std::move(right);
      }
    };

    if (P <= static_cast<std::size_t>(cfg.max_exhaustive_levels)) {
      // present[0] is fixed on the left, so each partition is visited once;
      // the all-bits mask (empty right child) is excluded.
      const std::uint64_t limit = 1ULL << (P - 1);
      for (std::uint64_t mask = 0; mask + 1 < limit; ++mask) eval_subset(mask);
    } else {
      // One level vs the rest; each present level alone on the left.
      for (std::size_t l = 0; l < P; ++l) {
        double nl = ln[static_cast<std::size_t>(present[l])];
        const double nr = n_total - nl;
        if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
        double child_imp;
        if (classification_) {
          const auto& cl = lcls[static_cast<std::size_t>(present[l])];
          std::vector<double> cr(cl.size(), 0.0);
          for (std::size_t o = 0; o < P; ++o) {
            if (o == l) continue;
            for (std::size_t c = 0; c < cr.size(); ++c)
              cr[c] += lcls[static_cast<std::size_t>(present[o])][c];
          }
          child_imp = gini_part(cl, nl) + gini_part(cr, nr);
        } else {
          double sr = 0.0, sr2 = 0.0;
          for (std::size_t o = 0; o < P; ++o) {
            if (o == l) continue;
            sr += lsum[static_cast<std::size_t>(present[o])];
            sr2 += lsum2[static_cast<std::size_t>(present[o])];
          }
          child_imp = sse_part(lsum[static_cast<std::size_t>(present[l])],
                               lsum2[static_cast<std::size_t>(present[l])], nl) +
                      sse_part(sr, sr2, nr);
        }
        const double decrease = parent_imp - child_imp;
        if (decrease > best->decrease) {
          best->decrease = decrease;
          best->feature = fi;
          best->threshold = 0.0;
          best->left_codes = {present[l]};
          best->right_codes.clear();
          for (std::size_t o = 0; o < P; ++o)
            if (o != l) best->right_codes.push_back(present[o]);
          std::sort(best->right_codes.begin(), best->right_codes.end());
        }
      }
    }
  }

  std::vector<TreeNode> nodes_;
  bool classification_ = true;
  int n_classes_ = 2;
};

inline DecisionTree fit_classification_tree(const FeatureTable& features,
                                            const std::vector<std::int32_t>& y, int n_classes,
                                            const TreeConfig& cfg = {}) {
  return DecisionTree::fit_classification(features, y, n_classes, cfg);
}

inline DecisionTree fit_regression_tree(const FeatureTable& features, const std::vector<double>& y,
                                        const TreeConfig& cfg = {}) {
  return DecisionTree::fit_regression(features, y, cfg);
}

// Per-row P(class = 1) for a binary classification tree.
inline std::vector<double> predict_scores(const DecisionTree& tree, const FeatureTable& features) {
  if (!tree.is_classification() || tree.n_classes() != 2)
    throw std::invalid_argument("predict_scores: needs a binary classification tree");
  const std::size_t n = feature_rows(features);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = tree.predict_value(features, i);
  return out;
}

// Training-row donor drawn uniformly from the leaf that `row` falls into.
inline int sample_from_leaf(const DecisionTree& tree, const FeatureTable& features,
                            std::size_t row, Rng& rng) {
  const auto& leaf = tree.nodes()[static_cast<std::size_t>(tree.route(features, row))];
  const auto& donors = leaf.donors;
  if (donors.empty()) throw std::logic_error("sample_from_leaf: leaf has no donors");
  return donors[rng.uniform_below(donors.size())];
}

}  // namespace synthmetric
