#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pems/common.hpp"
#include "pems/ingest.hpp"
#include "pems/linalg.hpp"

namespace pems {

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

struct VariableSummary {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1)
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  std::vector<HistogramBin> histogram;
};

struct CorrelationMatrix {
  std::vector<std::string> names;
  Matrix values;

  double at(std::string_view a, std::string_view b) const {
    const auto ia = std::find(names.begin(), names.end(), a) - names.begin();
    const auto ib = std::find(names.begin(), names.end(), b) - names.begin();
    if (ia == static_cast<long>(names.size()) || ib == static_cast<long>(names.size())) {
      throw config_error("variable not in correlation matrix");
    }
    return values(static_cast<std::size_t>(ia), static_cast<std::size_t>(ib));
  }
};

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Sample standard deviation, two-pass.
inline double stddev_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Linear-interpolation quantile of already sorted data (position q * (n - 1)).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw numeric_error("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline std::vector<HistogramBin> histogram(std::span<const double> x, std::size_t bins) {
  if (bins == 0) throw config_error("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) return {{lo, hi, x.size()}};
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lower = lo + width * static_cast<double>(b);
    out[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : x) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    ++out[b].count;
  }
  return out;
}

inline VariableSummary summarize_column(std::string name, std::span<const double> x,
                                        std::size_t bins) {
  if (x.empty()) throw numeric_error("cannot summarize an empty dataset");
  VariableSummary s;
  s.name = std::move(name);
  s.count = x.size();
  s.mean = mean_of(x);
  s.std = stddev_of(x);
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.histogram = histogram(x, bins);
  return s;
}

inline std::vector<Variable> default_summary_variables() {
  std::vector<Variable> vars(kPredictors.begin(), kPredictors.end());
  vars.push_back(Variable::NOX);
  return vars;
}

inline std::vector<VariableSummary> summarize(const Dataset& ds, std::size_t bins,
                                              const std::vector<Variable>& variables) {
  if (ds.empty()) throw numeric_error("cannot summarize an empty dataset");
  if (bins == 0) throw config_error("bins must be at least 1");
  std::vector<VariableSummary> out(variables.size());
  parallel_for(variables.size(), [&](std::size_t i) {
    const auto col = ds.column(variables[i]);
    out[i] = summarize_column(std::string(name_of(variables[i])), col, bins);
  });
  return out;
}

inline std::vector<VariableSummary> summarize(const Dataset& ds, std::size_t bins = 30) {
  return summarize(ds, bins, default_summary_variables());
}

// Pearson coefficient via centred sums, clamped to [-1, 1].
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw numeric_error("pearson needs >= 2 paired values");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw numeric_error("pearson of a zero-variance variable");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& columns,
                                            std::vector<std::string> names) {
  const std::size_t p = columns.size();
  if (p == 0) throw config_error("correlation needs at least one variable");
  if (columns.front().size() < 2) throw numeric_error("correlation needs at least 2 records");
  for (std::size_t i = 0; i < p; ++i) {
    if (stddev_of(columns[i]) == 0.0) {
      throw numeric_error("zero-variance variable " + names[i]);
    }
  }
  CorrelationMatrix cm{std::move(names), Matrix(p, p)};
  for (std::size_t i = 0; i < p; ++i) {
    cm.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < p; ++j) {
      const double r = pearson(columns[i], columns[j]);
      cm.values(i, j) = r;
      cm.values(j, i) = r;
    }
  }
  return cm;
}

inline CorrelationMatrix correlation_matrix(const Dataset& ds, const std::vector<Variable>& vars) {
  std::vector<std::vector<double>> cols;
  cols.reserve(vars.size());
  for (auto v : vars) cols.push_back(ds.column(v));
  return correlation_matrix(cols, names_of(vars));
}

inline double high_nox_threshold(const Dataset& ds, double quantile) {
  if (!(quantile >= 0.0 && quantile < 1.0)) throw config_error("quantile must lie in [0, 1)");
  auto nox = ds.column(Variable::NOX);
  std::sort(nox.begin(), nox.end());
  return quantile_sorted(nox, quantile);
}

// True for records whose NOx lies strictly above the empirical quantile.
inline std::vector<bool> flag_high_nox(const Dataset& ds, double quantile = 0.8) {
  if (ds.empty()) return {};
  const double threshold = high_nox_threshold(ds, quantile);
  std::vector<bool> mask(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) mask[i] = ds[i].nox > threshold;
  return mask;
}

}  // namespace pems
