#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixture.hpp"
#include "pems/stats.hpp"

using namespace pems;

namespace {

// Textbook Pearson in long double from raw sums of the centred data.
double pearson_reference(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

Dataset with_nox(const std::vector<double>& values) {
  std::vector<ObservationRecord> recs;
  for (double v : values) {
    ObservationRecord r;
    r.nox = v;
    r.year = 2011;
    recs.push_back(r);
  }
  return Dataset(recs);
}

}  // namespace

TEST(Summary, TwoRecordsByHand) {
  const std::vector<double> x{1.0, 3.0};
  const auto s = summarize_column("X", x, 2);
  EXPECT_EQ(s.count, 2u);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(2.0));
  ASSERT_EQ(s.histogram.size(), 2u);
  EXPECT_DOUBLE_EQ(s.histogram[0].lower, 1.0);
  EXPECT_DOUBLE_EQ(s.histogram[0].upper, 2.0);
  EXPECT_EQ(s.histogram[0].count, 1u);
  EXPECT_DOUBLE_EQ(s.histogram[1].upper, 3.0);
  EXPECT_EQ(s.histogram[1].count, 1u);
}

TEST(Summary, ConstantColumn) {
  const std::vector<double> x(7, 4.25);
  const auto s = summarize_column("X", x, 30);
  EXPECT_EQ(s.std, 0.0);
  ASSERT_EQ(s.histogram.size(), 1u);
  EXPECT_EQ(s.histogram[0].count, 7u);
}

TEST(Summary, OrderingAndCountsOnFixture) {
  const auto ds = fixture::make_dataset({2011, 2012, 2013}, 200);
  const auto all = summarize(ds, 30);
  ASSERT_EQ(all.size(), 10u);
  EXPECT_EQ(all.back().name, "NOX");
  for (const auto& s : all) {
    EXPECT_LE(s.min, s.q1);
    EXPECT_LE(s.q1, s.median);
    EXPECT_LE(s.median, s.q3);
    EXPECT_LE(s.q3, s.max);
    std::size_t total = 0;
    for (const auto& b : s.histogram) total += b.count;
    EXPECT_EQ(total, s.count);
    EXPECT_EQ(s.histogram.front().lower, s.min);
    EXPECT_EQ(s.histogram.back().upper, s.max);
  }
  std::size_t per_year = 0;
  for (int y : ds.years()) per_year += summarize(ds.filter_year(y), 10).front().count;
  EXPECT_EQ(per_year, all.front().count);
}

TEST(Summary, Quartiles) {
  const std::vector<double> sorted{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile_sorted(sorted, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(sorted, 0.5), 3.0);
  const std::vector<double> four{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(four, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(four, 0.25), 1.75);
}

TEST(Summary, Errors) {
  EXPECT_THROW(summarize(Dataset{}, 10), numeric_error);
  EXPECT_THROW(summarize(fixture::make_dataset({2011}, 5), 0), config_error);
}

TEST(Correlation, MatchesReference) {
  const auto ds = fixture::make_dataset({2011, 2012}, 300);
  const std::vector<Variable> vars(kPredictors.begin(), kPredictors.end());
  const auto cm = correlation_matrix(ds, vars);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    EXPECT_EQ(cm.values(i, i), 1.0);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      EXPECT_EQ(cm.values(i, j), cm.values(j, i));
      EXPECT_LE(std::abs(cm.values(i, j)), 1.0);
      if (i != j) {
        EXPECT_NEAR(cm.values(i, j), pearson_reference(ds.column(vars[i]), ds.column(vars[j])), 1e-12);
      }
    }
  }
  EXPECT_EQ(cm.values, cm.values.transpose());
  EXPECT_EQ(cm.at("AT", "AT"), 1.0);
  EXPECT_LT(cm.at("AT", "AH"), -0.3);
  EXPECT_GT(cm.at("TIT", "TEY"), 0.8);
}

TEST(Correlation, AffineInvariance) {
  const auto ds = fixture::make_dataset({2011}, 500, 11);
  const auto x = ds.column(Variable::TIT);
  const auto y = ds.column(Variable::CDP);
  std::vector<double> scaled(x.size());
  std::transform(x.begin(), x.end(), scaled.begin(), [](double v) { return 3.7 * v - 120.0; });
  EXPECT_NEAR(pearson(x, y), pearson(scaled, y), 1e-12);
}

TEST(Correlation, ZeroVarianceIsNamed) {
  auto recs = fixture::make_dataset({2011}, 10).records();
  for (auto& r : recs) r.ap = 1000.0;
  try {
    correlation_matrix(Dataset(recs), {Variable::AT, Variable::AP});
    FAIL();
  } catch (const numeric_error& e) {
    EXPECT_NE(std::string(e.what()).find("AP"), std::string::npos);
  }
  EXPECT_THROW(correlation_matrix(fixture::make_dataset({2011}, 1), {Variable::AT, Variable::AH}),
               numeric_error);
}

TEST(HighNox, MedianOfFour) {
  const auto mask = flag_high_nox(with_nox({1, 2, 3, 4}), 0.5);
  EXPECT_EQ(mask, (std::vector<bool>{false, false, true, true}));
}

TEST(HighNox, ZeroQuantileFlagsAllButMinimum) {
  const auto mask = flag_high_nox(with_nox({5, 1, 3, 2, 9}), 0.0);
  EXPECT_EQ(mask, (std::vector<bool>{true, false, true, true, true}));
}

TEST(HighNox, CountMatchesDirectSort) {
  const auto ds = fixture::make_dataset({2011, 2012, 2013}, 1000, 5);
  auto nox = ds.column(Variable::NOX);
  std::sort(nox.begin(), nox.end());
  // Independent threshold: linear interpolation at 0.8 * (n - 1).
  const double pos = 0.8 * static_cast<double>(nox.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double threshold = nox[lo] + (pos - static_cast<double>(lo)) * (nox[lo + 1] - nox[lo]);
  const auto expected = static_cast<std::size_t>(nox.end() - std::upper_bound(nox.begin(), nox.end(), threshold));
  const auto mask = flag_high_nox(ds, 0.8);
  EXPECT_EQ(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true)), expected);
  EXPECT_NEAR(static_cast<double>(expected), 0.2 * 3000.0, 1.0);
  EXPECT_THROW(flag_high_nox(ds, 1.0), config_error);
}
