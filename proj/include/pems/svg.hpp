#pragma once

// Minimal SVG charts: scatter and line panels arranged on a grid. Points carry
// a CSS class so flagged records (e.g. high NOx) can be styled separately.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pems/common.hpp"

namespace pems::svg {

struct Series {
  std::string css_class;
  std::vector<double> x;
  std::vector<double> y;
  bool line = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void bounds(const std::vector<double>& v, double& lo, double& hi) {
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
}

}  // namespace detail

inline constexpr const char* kStyle =
    "<style>"
    "text{font-family:sans-serif;font-size:10px}"
    ".title{font-size:12px;font-weight:bold}"
    ".axis{stroke:#333;stroke-width:1;fill:none}"
    ".normal{fill:#1f77b4;fill-opacity:0.35}"
    ".flagged{fill:#d62728;fill-opacity:0.7}"
    ".curve{stroke:#1f77b4;stroke-width:1.5;fill:none}"
    ".reference{stroke:#999;stroke-width:1;stroke-dasharray:4 3;fill:none}"
    "</style>";

// Renders panels on a grid with `columns` panels per row.
inline std::string render(const std::vector<Panel>& panels, std::size_t columns,
                          double panel_w = 320.0, double panel_h = 240.0,
                          const std::vector<std::pair<std::string, std::string>>& year_classes = {}) {
  columns = std::max<std::size_t>(1, std::min(columns, panels.size()));
  const std::size_t rows = (panels.size() + columns - 1) / columns;
  const double margin_l = 48.0, margin_r = 10.0, margin_t = 22.0, margin_b = 30.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(panel_w * columns)
      << "\" height=\"" << detail::fmt(panel_h * rows) << "\">" << kStyle;
  if (!year_classes.empty()) {
    out << "<style>";
    for (const auto& [cls, color] : year_classes) out << "." << cls << "{fill:" << color << ";fill-opacity:0.4}";
    out << "</style>";
  }

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const Panel& panel = panels[p];
    const double ox = panel_w * static_cast<double>(p % columns);
    const double oy = panel_h * static_cast<double>(p / columns);
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : panel.series) {
      detail::bounds(s.x, xlo, xhi);
      detail::bounds(s.y, ylo, yhi);
    }
    if (!(xlo <= xhi)) xlo = 0, xhi = 1;
    if (!(ylo <= yhi)) ylo = 0, yhi = 1;
    if (xlo == xhi) xlo -= 0.5, xhi += 0.5;
    if (ylo == yhi) ylo -= 0.5, yhi += 0.5;
    const double w = panel_w - margin_l - margin_r;
    const double h = panel_h - margin_t - margin_b;
    auto px = [&](double x) { return ox + margin_l + (x - xlo) / (xhi - xlo) * w; };
    auto py = [&](double y) { return oy + margin_t + h - (y - ylo) / (yhi - ylo) * h; };

    out << "<g>";
    out << "<text class=\"title\" x=\"" << detail::fmt(ox + margin_l) << "\" y=\"" << detail::fmt(oy + 14)
        << "\">" << detail::escape(panel.title) << "</text>";
    out << "<rect class=\"axis\" x=\"" << detail::fmt(ox + margin_l) << "\" y=\"" << detail::fmt(oy + margin_t)
        << "\" width=\"" << detail::fmt(w) << "\" height=\"" << detail::fmt(h) << "\"/>";
    out << "<text x=\"" << detail::fmt(ox + margin_l) << "\" y=\"" << detail::fmt(oy + panel_h - 4) << "\">"
        << detail::tick(xlo) << "</text>";
    out << "<text x=\"" << detail::fmt(ox + panel_w - margin_r) << "\" y=\"" << detail::fmt(oy + panel_h - 4)
        << "\" text-anchor=\"end\">" << detail::tick(xhi) << "</text>";
    out << "<text x=\"" << detail::fmt(ox + margin_l + w / 2) << "\" y=\"" << detail::fmt(oy + panel_h - 4)
        << "\" text-anchor=\"middle\">" << detail::escape(panel.x_label) << "</text>";
    out << "<text x=\"" << detail::fmt(ox + 2) << "\" y=\"" << detail::fmt(oy + margin_t + 8) << "\">"
        << detail::tick(yhi) << "</text>";
    out << "<text x=\"" << detail::fmt(ox + 2) << "\" y=\"" << detail::fmt(oy + margin_t + h) << "\">"
        << detail::tick(ylo) << "</text>";
    out << "<text x=\"" << detail::fmt(ox + 2) << "\" y=\"" << detail::fmt(oy + margin_t + h / 2) << "\">"
        << detail::escape(panel.y_label) << "</text>";

    for (const auto& s : panel.series) {
      if (s.line) {
        out << "<polyline class=\"" << s.css_class << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          out << (i ? " " : "") << detail::fmt(px(s.x[i])) << "," << detail::fmt(py(s.y[i]));
        }
        out << "\"/>";
        continue;
      }
      out << "<g class=\"" << s.css_class << "\">";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        out << "<circle cx=\"" << detail::fmt(px(s.x[i])) << "\" cy=\"" << detail::fmt(py(s.y[i]))
            << "\" r=\"1.5\"/>";
      }
      out << "</g>";
    }
    out << "</g>";
  }
  out << "</svg>\n";
  return out.str();
}

// Indices 0..n-1 thinned to at most `limit` by a fixed stride.
inline std::vector<std::size_t> thin(std::size_t n, std::size_t limit) {
  std::vector<std::size_t> out;
  const std::size_t stride = n > limit ? (n + limit - 1) / limit : 1;
  for (std::size_t i = 0; i < n; i += stride) out.push_back(i);
  return out;
}

}  // namespace pems::svg
