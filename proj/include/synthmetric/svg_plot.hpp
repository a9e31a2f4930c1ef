#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthmetric/utility_specific.hpp"

namespace synthmetric {

// Minimal forest plot of a fit comparison: one row per estimable coefficient,
// original interval above synthetic interval, shared horizontal scale, a
// dashed reference line at zero. Pure-string SVG so no graphics dependency.
inline std::string render_forest_svg(const FitComparison& cmp,
                                     const std::string& title = "interval overlap") {
  std::vector<const CoefficientComparison*> rows;
  for (const auto& c : cmp.coefficients)
    if (c.available) rows.push_back(&c);
  if (rows.empty()) throw std::invalid_argument("render_forest_svg: no estimable coefficients");

  double lo = rows[0]->ci_orig_lo, hi = rows[0]->ci_orig_hi;
  for (const auto* c : rows) {
    lo = std::min({lo, c->ci_orig_lo, c->ci_syn_lo});
    hi = std::max({hi, c->ci_orig_hi, c->ci_syn_hi});
  }
  const double pad = 0.05 * (hi - lo + 1e-12);
  lo -= pad;
  hi += pad;

  const int label_w = 210, plot_w = 560, row_h = 34, top = 48, bottom = 34;
  const int width = label_w + plot_w + 30;
  const int height = top + row_h * static_cast<int>(rows.size()) + bottom;
  const auto sx = [&](double v) {
    return label_w + plot_w * (v - lo) / (hi - lo);
  };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(label_w) + "\" y=\"20\" font-size=\"14\">" + title +
       "</text>\n";
  s += "<text x=\"" + std::to_string(label_w) + "\" y=\"36\" fill=\"#1f6feb\">original</text>\n";
  s += "<text x=\"" + std::to_string(label_w + 70) + "\" y=\"36\" fill=\"#d4670e\">synthetic</text>\n";

  if (lo < 0.0 && hi > 0.0) {
    const double x0 = sx(0.0);
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + std::to_string(top - 6) + "\" x2=\"" + num(x0) +
         "\" y2=\"" + std::to_string(height - bottom + 6) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  }

  int y = top;
  for (const auto* c : rows) {
    const int y_orig = y + row_h / 2 - 5;
    const int y_syn = y + row_h / 2 + 5;
    s += "<text x=\"8\" y=\"" + std::to_string(y + row_h / 2 + 4) + "\">" + c->term + "</text>\n";
    s += "<line x1=\"" + num(sx(c->ci_orig_lo)) + "\" y1=\"" + std::to_string(y_orig) +
         "\" x2=\"" + num(sx(c->ci_orig_hi)) + "\" y2=\"" + std::to_string(y_orig) +
         "\" stroke=\"#1f6feb\" stroke-width=\"3\"/>\n";
    s += "<circle cx=\"" + num(sx(c->beta_orig)) + "\" cy=\"" + std::to_string(y_orig) +
         "\" r=\"3.5\" fill=\"#1f6feb\"/>\n";
    s += "<line x1=\"" + num(sx(c->ci_syn_lo)) + "\" y1=\"" + std::to_string(y_syn) + "\" x2=\"" +
         num(sx(c->ci_syn_hi)) + "\" y2=\"" + std::to_string(y_syn) +
         "\" stroke=\"#d4670e\" stroke-width=\"3\"/>\n";
    s += "<circle cx=\"" + num(sx(c->beta_syn)) + "\" cy=\"" + std::to_string(y_syn) +
         "\" r=\"3.5\" fill=\"#d4670e\"/>\n";
    y += row_h;
  }

  // Axis with five ticks.
  const int axis_y = height - bottom + 6;
  s += "<line x1=\"" + std::to_string(label_w) + "\" y1=\"" + std::to_string(axis_y) + "\" x2=\"" +
       std::to_string(label_w + plot_w) + "\" y2=\"" + std::to_string(axis_y) +
       "\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const double x = sx(v);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + std::to_string(axis_y) + "\" x2=\"" + num(x) +
         "\" y2=\"" + std::to_string(axis_y + 4) + "\" stroke=\"#333\"/>\n";
    s += "<text x=\"" + num(x - 14) + "\" y=\"" + std::to_string(axis_y + 18) + "\">" + num(v) +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

inline void write_forest_svg(const std::string& path, const FitComparison& cmp,
                             const std::string& title = "interval overlap") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write SVG file: " + path);
  out << render_forest_svg(cmp, title);
  if (!out) throw std::runtime_error("SVG write failed: " + path);
}

}  // namespace synthmetric
