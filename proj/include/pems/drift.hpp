#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pems/common.hpp"
#include "pems/ingest.hpp"
#include "pems/linalg.hpp"
#include "pems/stats.hpp"

namespace pems {

// Correlation-matrix PCA. Loadings are stored as columns in descending
// eigenvalue order; each column's largest-magnitude entry is positive.
struct PcaModel {
  std::vector<Variable> variables;
  std::vector<double> means;
  std::vector<double> stds;
  Matrix loadings;
  std::vector<double> eigenvalues;

  std::size_t dimension() const { return variables.size(); }
};

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;

  double operator()(double x) const { return intercept + slope * x; }
};

struct YearDrift {
  int year = 0;
  std::size_t rows = 0;
  double pc1 = 0.0;  // score centroid
  double pc2 = 0.0;
  double displacement = 0.0;  // from the reference centroid
  LinearFit fit;
};

struct DriftReport {
  int reference_year = 0;
  PcaModel pca;
  std::vector<YearDrift> years;
  Variable fit_x = Variable::TEP;
  Variable fit_y = Variable::CDP;
  double x_unit_scale = 0.001;

  std::vector<std::pair<int, double>> r2_trajectory() const {
    std::vector<std::pair<int, double>> out;
    for (const auto& y : years) out.emplace_back(y.year, y.fit.r_squared);
    return out;
  }

  const YearDrift& year(int y) const {
    for (const auto& d : years) {
      if (d.year == y) return d;
    }
    throw config_error("year not in drift report: " + std::to_string(y));
  }
};

inline PcaModel fit_pca(const Dataset& ds, const std::vector<Variable>& variables) {
  const std::size_t p = variables.size();
  if (p == 0) throw config_error("PCA needs at least one variable");
  if (ds.size() <= p) throw numeric_error("PCA needs more rows than variables");
  PcaModel model;
  model.variables = variables;
  std::vector<std::vector<double>> cols;
  for (auto v : variables) {
    cols.push_back(ds.column(v));
    model.means.push_back(mean_of(cols.back()));
    model.stds.push_back(stddev_of(cols.back()));
    if (model.stds.back() == 0.0) {
      throw numeric_error("zero-variance variable " + std::string(name_of(v)));
    }
  }
  const auto corr = correlation_matrix(cols, names_of(variables));
  auto eig = eigen_symmetric(corr.values);
  for (auto& l : eig.values) {
    if (l < 0.0 && l > -1e-12 * static_cast<double>(p)) l = 0.0;
  }
  model.loadings = std::move(eig.vectors);
  model.eigenvalues = std::move(eig.values);
  return model;
}

// Scores (rows x n_components) using the model's own standardization, so data
// from other years lands in the reference coordinate system.
inline Matrix project(const PcaModel& model, const Dataset& ds, std::size_t n_components) {
  if (n_components < 1 || n_components > model.dimension()) {
    throw config_error("number of components must lie in [1, " +
                       std::to_string(model.dimension()) + "]");
  }
  const std::size_t p = model.dimension();
  Matrix scores(ds.size(), n_components);
  std::vector<double> z(p);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      z[j] = (value_of(ds[i], model.variables[j]) - model.means[j]) / model.stds[j];
    }
    for (std::size_t k = 0; k < n_components; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < p; ++j) s += z[j] * model.loadings(j, k);
      scores(i, k) = s;
    }
  }
  return scores;
}

inline LinearFit ols_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw numeric_error("least squares needs >= 2 paired values");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw numeric_error("least squares with zero-variance regressor");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

// Ordinary least squares of y on (x * x_unit_scale), one fit per year.
inline std::map<int, LinearFit> yearly_fit(const Dataset& ds, Variable x, Variable y,
                                           double x_unit_scale = 1.0) {
  std::map<int, LinearFit> out;
  for (int year : ds.years()) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& r : ds.records()) {
      if (r.year != year) continue;
      xs.push_back(value_of(r, x) * x_unit_scale);
      ys.push_back(value_of(r, y));
    }
    if (xs.size() < 2) {
      throw numeric_error("degenerate year " + std::to_string(year) + ": fewer than 2 rows");
    }
    try {
      out[year] = ols_fit(xs, ys);
    } catch (const numeric_error&) {
      throw numeric_error("degenerate year " + std::to_string(year) + ": zero variance in " +
                          std::string(name_of(x)));
    }
  }
  return out;
}

// PCA fitted on the reference year, every year projected into it, plus the
// yearly CDP-on-TEP fits.
inline DriftReport drift_report(const Dataset& ds, int reference_year,
                                const std::vector<Variable>& variables,
                                double x_unit_scale = 0.001) {
  const auto& years = ds.years();
  if (std::find(years.begin(), years.end(), reference_year) == years.end()) {
    throw config_error("reference year " + std::to_string(reference_year) + " not in dataset");
  }
  DriftReport report;
  report.reference_year = reference_year;
  report.x_unit_scale = x_unit_scale;
  report.pca = fit_pca(ds.filter_year(reference_year), variables);
  const std::size_t n_comp = std::min<std::size_t>(2, variables.size());
  const auto fits = yearly_fit(ds, report.fit_x, report.fit_y, x_unit_scale);

  for (int year : years) {
    const Dataset part = ds.filter_year(year);
    const Matrix scores = project(report.pca, part, n_comp);
    YearDrift d;
    d.year = year;
    d.rows = part.size();
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      d.pc1 += scores(i, 0);
      if (n_comp > 1) d.pc2 += scores(i, 1);
    }
    d.pc1 /= static_cast<double>(scores.rows());
    d.pc2 /= static_cast<double>(scores.rows());
    d.fit = fits.at(year);
    report.years.push_back(d);
  }
  const YearDrift& ref = report.year(reference_year);
  const double ref1 = ref.pc1;
  const double ref2 = ref.pc2;
  for (auto& d : report.years) d.displacement = std::hypot(d.pc1 - ref1, d.pc2 - ref2);
  return report;
}

inline DriftReport drift_report(const Dataset& ds, int reference_year) {
  return drift_report(ds, reference_year, {kPredictors.begin(), kPredictors.end()});
}

}  // namespace pems
