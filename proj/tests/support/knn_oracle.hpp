#pragma once

// Brute-force KNN reference: every distance computed, full sort by
// (distance, row), then the documented combination rule. Works on the
// model's standardized matrix so results can be compared bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "fixture.hpp"
#include "pems/knn.hpp"

namespace oracle {

inline double knn_predict(const pems::KnnModel& m, const std::vector<double>& raw, std::size_t self,
                          bool has_self) {
  const std::size_t p = m.dims();
  std::vector<double> z(p);
  for (std::size_t j = 0; j < p; ++j) z[j] = (raw[j] - m.means[j]) / m.stds[j];

  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (has_self && m.leave_self_out && i == self) continue;
    double sq = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d = z[j] - m.matrix[i * p + j];
      sq += d * d;
    }
    all.emplace_back(std::sqrt(sq), i);
  }
  std::sort(all.begin(), all.end());
  const std::size_t k = std::min(m.k, all.size());

  if (m.weighting == pems::Weighting::Uniform) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += m.targets[all[i].second];
    return s / static_cast<double>(k);
  }
  double zero_sum = 0.0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (all[i].first == 0.0) {
      zero_sum += m.targets[all[i].second];
      ++zeros;
    }
  }
  if (zeros > 0) return zero_sum / static_cast<double>(zeros);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / all[i].first;
    num += m.targets[all[i].second] * w;
    den += w;
  }
  return num / den;
}

// One randomized instance: small table with deliberate duplicate rows and
// integer-valued columns so ties and exact matches occur.
struct Instance {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<std::vector<double>> queries;
  pems::KnnSpec spec;
};

inline Instance random_instance(std::uint64_t seed) {
  fixture::Normal g(seed);
  pems::Rng pick(seed ^ 0x9E3779B97F4A7C15ULL);
  Instance in;
  const std::size_t n = 2 + pick.below(199);  // 2..200
  const std::size_t p = 1 + pick.below(5);
  const bool coarse = pick.below(3) == 0;
  in.spec.predictors.assign(pems::kPredictors.begin(), pems::kPredictors.begin() + static_cast<long>(p));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(p);
    if (i > 0 && pick.below(8) == 0) {
      row = in.x[pick.below(i)];
    } else {
      for (auto& v : row) v = coarse ? std::round(3.0 * g()) : g() * 10.0 + 5.0;
    }
    in.x.push_back(row);
    in.y.push_back(coarse ? std::round(5.0 * g()) : 50.0 + 8.0 * g());
  }
  // Guard against a constant column, which fit_knn rejects.
  for (std::size_t j = 0; j < p; ++j) {
    bool constant = true;
    for (std::size_t i = 1; i < n; ++i) constant &= in.x[i][j] == in.x[0][j];
    if (constant) in.x[n - 1][j] += 1.0;
  }
  in.spec.k = 1 + pick.below(std::min<std::size_t>(n, 12));
  in.spec.weighting = pick.below(2) == 0 ? pems::Weighting::InverseDistance : pems::Weighting::Uniform;
  in.spec.leave_self_out = pick.below(2) == 0;
  for (int q = 0; q < 5; ++q) {
    std::vector<double> row(p);
    for (auto& v : row) v = coarse ? std::round(3.0 * g()) : g() * 10.0 + 5.0;
    in.queries.push_back(row);
  }
  return in;
}

// Runs one instance; returns the number of mismatching predictions.
inline std::size_t check_instance(std::uint64_t seed, std::size_t* compared = nullptr) {
  const auto in = random_instance(seed);
  const auto model = pems::fit_knn(in.x, in.y, in.spec);
  std::size_t bad = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < in.x.size(); ++i) {
    ++count;
    if (pems::predict(model, in.x[i], i) != knn_predict(model, in.x[i], i, true)) ++bad;
  }
  for (const auto& q : in.queries) {
    ++count;
    if (pems::predict(model, q) != knn_predict(model, q, 0, false)) ++bad;
  }
  if (compared) *compared += count;
  return bad;
}

}  // namespace oracle
