#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fixture.hpp"
#include "pems/drift.hpp"

using namespace pems;

namespace {

const std::vector<Variable> kNine(kPredictors.begin(), kPredictors.end());

double sample_variance(const std::vector<double>& x) {
  long double m = 0;
  for (double v : x) m += v;
  m /= x.size();
  long double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(s / (x.size() - 1));
}

Dataset two_columns(const std::vector<double>& at, const std::vector<double>& ah) {
  std::vector<ObservationRecord> recs;
  for (std::size_t i = 0; i < at.size(); ++i) {
    ObservationRecord r;
    r.at = at[i];
    r.ah = ah[i];
    r.year = 2011;
    recs.push_back(r);
  }
  return Dataset(recs);
}

}  // namespace

TEST(Pca, PerfectlyCorrelatedPair) {
  const auto model = fit_pca(two_columns({1, 2, 3, 4, 5}, {3, 5, 7, 9, 11}), {Variable::AT, Variable::AH});
  EXPECT_NEAR(model.eigenvalues[0], 2.0, 1e-12);
  EXPECT_NEAR(model.eigenvalues[1], 0.0, 1e-12);
  EXPECT_GE(model.eigenvalues[1], 0.0);
  EXPECT_NEAR(std::abs(model.loadings(0, 0)), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(model.loadings(1, 0)), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Pca, UncorrelatedGivesUnitEigenvalues) {
  // Orthogonal centred columns.
  const auto model = fit_pca(two_columns({1, -1, 1, -1}, {1, 1, -1, -1}), {Variable::AT, Variable::AH});
  EXPECT_NEAR(model.eigenvalues[0], 1.0, 1e-12);
  EXPECT_NEAR(model.eigenvalues[1], 1.0, 1e-12);
}

TEST(Pca, IdentitiesOnFittingData) {
  const auto ds = fixture::make_dataset({2011}, 800);
  const auto model = fit_pca(ds, kNine);
  double trace = 0.0;
  for (double l : model.eigenvalues) trace += l;
  EXPECT_NEAR(trace, 9.0, 1e-9);
  for (std::size_t k = 0; k + 1 < 9; ++k) EXPECT_GE(model.eigenvalues[k], model.eigenvalues[k + 1]);
  for (std::size_t a = 0; a < 9; ++a) {
    for (std::size_t b = 0; b < 9; ++b) {
      double d = 0.0;
      for (std::size_t j = 0; j < 9; ++j) d += model.loadings(j, a) * model.loadings(j, b);
      EXPECT_NEAR(d, a == b ? 1.0 : 0.0, 1e-9);
    }
  }
  const Matrix scores = project(model, ds, 9);
  for (std::size_t k = 0; k < 9; ++k) {
    const auto col = scores.column(k);
    double mean = 0.0;
    for (double v : col) mean += v;
    EXPECT_NEAR(mean / col.size(), 0.0, 1e-9);
    EXPECT_NEAR(sample_variance(col), model.eigenvalues[k], 1e-6);
  }
}

TEST(Pca, EigenvaluesMatchCovarianceOfStandardizedData) {
  const auto ds = fixture::make_dataset({2012}, 500, 31);
  const auto model = fit_pca(ds, kNine);
  const std::size_t n = ds.size();
  Eigen::MatrixXd z(n, 9);
  for (std::size_t j = 0; j < 9; ++j) {
    const auto col = ds.column(kNine[j]);
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(col.data(), n);
    v.array() -= v.mean();
    v /= std::sqrt(v.squaredNorm() / (n - 1));
    z.col(j) = v;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(z.transpose() * z / (n - 1.0));
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(model.eigenvalues[k], es.eigenvalues()(8 - k), 1e-10);
}

TEST(Pca, ScoresInvariantUnderPositiveRescaling) {
  const auto ds = fixture::make_dataset({2011}, 300, 8);
  auto recs = ds.records();
  for (auto& r : recs) {
    r.tit = 2.0 * r.tit + 5.0;
    r.ap = r.ap / 1000.0;
  }
  const Dataset scaled(recs);
  const auto a = project(fit_pca(ds, kNine), ds, 2);
  const auto b = project(fit_pca(scaled, kNine), scaled, 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_NEAR(a(i, 0), b(i, 0), 1e-9);
    EXPECT_NEAR(a(i, 1), b(i, 1), 1e-9);
  }
}

TEST(Pca, Errors) {
  EXPECT_THROW(fit_pca(fixture::make_dataset({2011}, 5), kNine), numeric_error);
  auto recs = fixture::make_dataset({2011}, 30).records();
  for (auto& r : recs) r.ap = 1000.0;
  EXPECT_THROW(fit_pca(Dataset(recs), kNine), numeric_error);
  const auto ds = fixture::make_dataset({2011}, 30);
  EXPECT_THROW(project(fit_pca(ds, kNine), ds, 10), config_error);
  EXPECT_THROW(project(fit_pca(ds, kNine), ds, 0), config_error);
}

TEST(Ols, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1, 3, 5, 7, 9};
  const auto fit = ols_fit(x, y);
  EXPECT_DOUBLE_EQ(fit.slope, 2.0);
  EXPECT_DOUBLE_EQ(fit.intercept, 1.0);
  EXPECT_DOUBLE_EQ(fit.r_squared, 1.0);
  EXPECT_EQ(fit.n, 5u);
}

TEST(Ols, AgreesWithLeastSquaresSolverAndPearson) {
  const auto ds = fixture::make_dataset({2011, 2012, 2013}, 400, 19);
  const auto fits = yearly_fit(ds, Variable::TEP, Variable::CDP, 0.001);
  ASSERT_EQ(fits.size(), 3u);
  for (const auto& [year, fit] : fits) {
    std::vector<double> x, y;
    for (auto i : ds.rows_of_year(year)) {
      x.push_back(ds[i].tep * 0.001);
      y.push_back(ds[i].cdp);
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, 0) = 1.0;
      a(i, 1) = x[i];
      b(i) = y[i];
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    EXPECT_NEAR(fit.intercept, coef(0), 1e-8 * std::abs(coef(0)) + 1e-9);
    EXPECT_NEAR(fit.slope, coef(1), 1e-8 * std::abs(coef(1)));
    const double r = pearson(x, y);
    EXPECT_NEAR(fit.r_squared, r * r, 1e-9);
    double resid = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) resid += y[i] - fit(x[i]);
    EXPECT_NEAR(resid, 0.0, 1e-6 * x.size());
  }
  // The fixture's CDP~TEP relation loosens with each year.
  EXPECT_GT(fits.at(2011).r_squared, fits.at(2013).r_squared);
  EXPECT_NEAR(fits.at(2011).slope, 263.6, 263.6 * 0.05);
}

TEST(Ols, DegenerateYear) {
  auto recs = fixture::make_dataset({2011, 2012}, 20).records();
  for (auto& r : recs) {
    if (r.year == 2012) r.tep = 25.0;
  }
  try {
    yearly_fit(Dataset(recs), Variable::TEP, Variable::CDP);
    FAIL();
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("2012"), std::string::npos);
  }
  std::vector<ObservationRecord> one(recs.begin(), recs.begin() + 21);
  EXPECT_THROW(yearly_fit(Dataset(one), Variable::TEP, Variable::CDP), numeric_error);
}

TEST(DriftReport, ReferenceAtOriginAndLaterYearsMove) {
  const auto ds = fixture::make_dataset({2011, 2012, 2013}, 500, 23);
  const auto rep = drift_report(ds, 2011);
  ASSERT_EQ(rep.years.size(), 3u);
  EXPECT_EQ(rep.year(2011).displacement, 0.0);
  EXPECT_NEAR(rep.year(2011).pc1, 0.0, 1e-9);
  EXPECT_GT(rep.year(2013).displacement, 0.0);
  const auto traj = rep.r2_trajectory();
  ASSERT_EQ(traj.size(), 3u);
  EXPECT_EQ(traj.front().first, 2011);
  EXPECT_GT(traj.front().second, traj.back().second);
  EXPECT_THROW(drift_report(ds, 2020), config_error);
}

TEST(DriftReport, IdenticalYearsDoNotDrift) {
  const auto base = fixture::make_dataset({2011}, 300, 6);
  auto recs = base.records();
  for (auto r : base.records()) {
    r.year = 2012;
    recs.push_back(r);
  }
  const auto rep = drift_report(Dataset(recs), 2011);
  for (const auto& y : rep.years) EXPECT_EQ(y.displacement, 0.0);
  EXPECT_EQ(rep.year(2011).fit.slope, rep.year(2012).fit.slope);
}
