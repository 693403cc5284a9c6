#pragma once

// Distance-weighted K-nearest-neighbour regression with per-year stratified
// splitting, validation-based K selection and pooled vs per-year comparison.
//
// Neighbour order is the total order (distance, training row index). Distances
// are Euclidean over predictors standardized with training-partition means and
// sample standard deviations. With inverse-distance weighting, any exact match
// among the selected neighbours short-circuits to the plain mean of the
// zero-distance targets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pems/common.hpp"
#include "pems/ingest.hpp"
#include "pems/random.hpp"
#include "pems/stats.hpp"

namespace pems {

enum class Partition : std::uint8_t { Training = 0, Validation = 1, Test = 2 };

inline constexpr std::array<Partition, 3> kPartitions = {Partition::Training, Partition::Validation,
                                                         Partition::Test};

inline std::string_view name_of(Partition p) {
  switch (p) {
    case Partition::Training: return "Training";
    case Partition::Validation: return "Validation";
    case Partition::Test: return "Test";
  }
  return "?";
}

enum class Weighting : std::uint8_t { InverseDistance, Uniform };

inline std::string_view name_of(Weighting w) {
  return w == Weighting::InverseDistance ? "inverse_distance" : "uniform";
}

inline Weighting parse_weighting(std::string_view text) {
  const auto t = to_upper(trim(text));
  if (t == "INVERSE_DISTANCE" || t == "INVERSE" || t == "DISTANCE") return Weighting::InverseDistance;
  if (t == "UNIFORM") return Weighting::Uniform;
  throw config_error("unknown weighting '" + std::string(text) + "'");
}

struct SplitFractions {
  double training = 0.70;
  double validation = 0.15;
  double test = 0.15;

  std::array<double, 3> as_array() const { return {training, validation, test}; }
};

struct SplitAssignment {
  std::vector<Partition> labels;  // one per dataset record
  std::uint64_t seed = 0;
  SplitFractions fractions;

  std::vector<std::size_t> rows(Partition p, std::optional<int> year = std::nullopt,
                                const Dataset* ds = nullptr) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != p) continue;
      if (year && ds && (*ds)[i].year != *year) continue;
      out.push_back(i);
    }
    return out;
  }
};

// Largest-remainder apportionment of n rows; ties go to the earlier partition.
inline std::array<std::size_t, 3> partition_counts(std::size_t n, const SplitFractions& f) {
  const auto frac = f.as_array();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = frac[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

inline void check_fractions(const SplitFractions& f) {
  for (double x : f.as_array()) {
    if (!(x > 0.0)) throw config_error("split fractions must be positive");
  }
  if (std::abs(f.training + f.validation + f.test - 1.0) > 1e-9) {
    throw config_error("split fractions must sum to 1");
  }
}

// Within each year: shuffle that year's rows with a year-derived seed, then
// hand out Training, Validation, Test blocks in that order.
inline SplitAssignment split(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed) {
  check_fractions(fractions);
  SplitAssignment out;
  out.seed = seed;
  out.fractions = fractions;
  out.labels.assign(ds.size(), Partition::Training);
  for (int year : ds.years()) {
    auto rows = ds.rows_of_year(year);
    if (rows.size() < 3) {
      throw config_error("year " + std::to_string(year) + " has fewer rows than partitions");
    }
    Rng rng(derive_seed(seed, kSplitStream + static_cast<std::uint64_t>(year)));
    rng.shuffle(std::span<std::size_t>(rows));
    const auto counts = partition_counts(rows.size(), fractions);
    std::size_t k = 0;
    for (std::size_t part = 0; part < 3; ++part) {
      for (std::size_t c = 0; c < counts[part]; ++c) out.labels[rows[k++]] = static_cast<Partition>(part);
    }
  }
  return out;
}

struct KnnSpec {
  std::vector<Variable> predictors{kPredictors.begin(), kPredictors.end()};
  Variable target = Variable::NOX;
  std::size_t k = 3;
  Weighting weighting = Weighting::InverseDistance;
  bool leave_self_out = true;
};

struct KnnModel {
  std::vector<Variable> predictors;
  Variable target = Variable::NOX;
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> matrix;  // row-major, standardized, rows() x dims()
  std::vector<double> targets;
  std::vector<std::size_t> source_rows;  // dataset index of each training row
  std::size_t k = 3;
  Weighting weighting = Weighting::InverseDistance;
  bool leave_self_out = true;

  std::size_t rows() const { return targets.size(); }
  std::size_t dims() const { return predictors.size(); }
  std::span<const double> row(std::size_t i) const { return {matrix.data() + i * dims(), dims()}; }

  bool operator==(const KnnModel&) const = default;
};

inline KnnModel fit_knn(std::span<const std::vector<double>> features, std::span<const double> target,
                        const KnnSpec& spec, std::vector<std::size_t> source_rows = {}) {
  const std::size_t n = target.size();
  const std::size_t p = spec.predictors.size();
  if (n == 0) throw config_error("training partition is empty");
  if (features.size() != n) throw config_error("feature/target row mismatch");
  if (spec.k < 1) throw config_error("k must be at least 1");
  if (spec.k > n) {
    throw config_error("k = " + std::to_string(spec.k) + " exceeds training rows (" +
                       std::to_string(n) + ")");
  }
  KnnModel m;
  m.predictors = spec.predictors;
  m.target = spec.target;
  m.k = spec.k;
  m.weighting = spec.weighting;
  m.leave_self_out = spec.leave_self_out;
  m.targets.assign(target.begin(), target.end());
  if (source_rows.empty()) {
    source_rows.resize(n);
    std::iota(source_rows.begin(), source_rows.end(), 0);
  }
  m.source_rows = std::move(source_rows);
  m.means.resize(p);
  m.stds.resize(p);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = features[i][j];
    m.means[j] = mean_of(col);
    m.stds[j] = n > 1 ? stddev_of(col) : 0.0;
    if (m.stds[j] == 0.0) {
      if (n > 1) {
        throw numeric_error("zero-variance predictor " + std::string(name_of(spec.predictors[j])) +
                            " in training partition");
      }
      m.stds[j] = 1.0;  // a single row carries no scale
    }
  }
  m.matrix.resize(n * p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) m.matrix[i * p + j] = (features[i][j] - m.means[j]) / m.stds[j];
  }
  return m;
}

inline std::vector<double> features_of(const ObservationRecord& r, const std::vector<Variable>& vars) {
  std::vector<double> out(vars.size());
  for (std::size_t j = 0; j < vars.size(); ++j) out[j] = value_of(r, vars[j]);
  return out;
}

// Fits on the Training rows of `ds` (optionally restricted to one year).
inline KnnModel fit_knn(const Dataset& ds, const SplitAssignment& assignment, const KnnSpec& spec,
                        std::optional<int> year = std::nullopt) {
  const auto rows = assignment.rows(Partition::Training, year, &ds);
  if (rows.empty()) throw config_error("training partition is empty");
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  x.reserve(rows.size());
  y.reserve(rows.size());
  for (auto i : rows) {
    x.push_back(features_of(ds[i], spec.predictors));
    y.push_back(value_of(ds[i], spec.target));
  }
  return fit_knn(x, y, spec, rows);
}

struct Neighbor {
  double distance = 0.0;
  std::size_t index = 0;  // training row
};

inline bool operator<(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

inline std::vector<double> standardize(const KnnModel& model, std::span<const double> raw) {
  if (raw.size() != model.dims()) throw config_error("query has wrong number of predictors");
  std::vector<double> z(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (!std::isfinite(raw[j])) {
      throw numeric_error("non-finite predictor value for " + std::string(name_of(model.predictors[j])));
    }
    z[j] = (raw[j] - model.means[j]) / model.stds[j];
  }
  return z;
}

// The `count` nearest training rows to a standardized query, ascending.
// Training row `skip` is left out; kNoRow skips nothing.
inline constexpr std::size_t kNoRow = static_cast<std::size_t>(-1);

inline std::vector<Neighbor> nearest(const KnnModel& model, std::span<const double> z, std::size_t count,
                                     std::size_t skip = kNoRow) {
  const std::size_t n = model.rows();
  const std::size_t p = model.dims();
  const std::size_t available = n - (skip < n ? 1 : 0);
  count = std::min(count, available);
  std::vector<Neighbor> best;
  std::vector<double> best_sq;
  best.reserve(count + 1);
  best_sq.reserve(count + 1);
  if (count == 0) return best;
  double worst_sq = std::numeric_limits<double>::infinity();
  const double* data = model.matrix.data();
  for (std::size_t i = 0; i < n; ++i) {
    if (i == skip) continue;
    const double* x = data + i * p;
    double sq = 0.0;
    std::size_t j = 0;
    for (; j < p; ++j) {
      const double d = z[j] - x[j];
      sq += d * d;
      if (sq > worst_sq) break;
    }
    // Rows are scanned by increasing index, so a candidate that does not beat
    // the current worst on squared distance cannot displace it.
    if (j < p || sq > worst_sq) continue;
    Neighbor cand{std::sqrt(sq), i};
    if (best.size() == count) {
      if (!(cand < best.back())) continue;
      best.pop_back();
      best_sq.pop_back();
    }
    const auto pos = std::upper_bound(best.begin(), best.end(), cand) - best.begin();
    best.insert(best.begin() + pos, cand);
    best_sq.insert(best_sq.begin() + pos, sq);
    if (best.size() == count) worst_sq = best_sq.back();
  }
  return best;
}

// Prediction from the first k entries of an ascending neighbour list.
inline double combine(const KnnModel& model, std::span<const Neighbor> neighbors, std::size_t k) {
  k = std::min(k, neighbors.size());
  if (k == 0) throw numeric_error("no neighbours available");
  if (model.weighting == Weighting::Uniform) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += model.targets[neighbors[i].index];
    return s / static_cast<double>(k);
  }
  if (neighbors[0].distance == 0.0) {
    double s = 0.0;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < k && neighbors[i].distance == 0.0; ++i, ++zeros) {
      s += model.targets[neighbors[i].index];
    }
    return s / static_cast<double>(zeros);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / neighbors[i].distance;
    num += model.targets[neighbors[i].index] * w;
    den += w;
  }
  return num / den;
}

// `self` is the query's own training row, excluded when leave_self_out is set.
inline double predict(const KnnModel& model, std::span<const double> raw,
                      std::optional<std::size_t> self = std::nullopt) {
  const auto z = standardize(model, raw);
  const std::size_t skip = model.leave_self_out && self ? *self : kNoRow;
  const auto nb = nearest(model, z, model.k, skip);
  return combine(model, nb, model.k);
}

inline std::optional<std::size_t> training_index(const KnnModel& model, std::size_t dataset_row) {
  auto it = std::lower_bound(model.source_rows.begin(), model.source_rows.end(), dataset_row);
  if (it != model.source_rows.end() && *it == dataset_row) {
    return static_cast<std::size_t>(it - model.source_rows.begin());
  }
  return std::nullopt;
}

inline double predict_record(const KnnModel& model, const Dataset& ds, std::size_t row) {
  return predict(model, features_of(ds[row], model.predictors), training_index(model, row));
}

// Predictions for many dataset rows, computed in parallel.
inline std::vector<double> predict_rows(const KnnModel& model, const Dataset& ds,
                                        std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) { out[i] = predict_record(model, ds, rows[i]); });
  return out;
}

struct EvalMetrics {
  std::optional<double> r_squared;  // missing when the actuals have zero variance
  double rase = 0.0;
  double aae = 0.0;
  std::size_t freq = 0;
};

inline EvalMetrics compute_metrics(std::span<const double> actual, std::span<const double> predicted) {
  const std::size_t n = actual.size();
  if (n == 0 || predicted.size() != n) throw numeric_error("metrics need a non-empty partition");
  const double mean = mean_of(actual);
  double sse = 0.0;
  double sae = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = actual[i] - predicted[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  EvalMetrics m;
  m.freq = n;
  m.rase = std::sqrt(sse / static_cast<double>(n));
  m.aae = sae / static_cast<double>(n);
  if (sst > 0.0) m.r_squared = 1.0 - sse / sst;
  return m;
}

inline EvalMetrics evaluate(const KnnModel& model, const Dataset& ds, const SplitAssignment& assignment,
                            Partition partition, std::optional<int> year = std::nullopt) {
  const auto rows = assignment.rows(partition, year, &ds);
  if (rows.empty()) throw numeric_error(std::string(name_of(partition)) + " partition is empty");
  const auto pred = predict_rows(model, ds, rows);
  std::vector<double> actual;
  actual.reserve(rows.size());
  for (auto i : rows) actual.push_back(value_of(ds[i], model.target));
  return compute_metrics(actual, pred);
}

struct KSelectionCurve {
  std::vector<std::pair<std::size_t, double>> points;  // (k, validation RASE)
  std::size_t chosen_k = 1;
};

// Fits once on Training, then scores every k in 1..k_max on Validation from a
// single nearest-neighbour scan per query (the k-prefix of the k_max list).
inline KSelectionCurve select_k(const Dataset& ds, const SplitAssignment& assignment, KnnSpec spec,
                                std::size_t k_max, std::optional<int> year = std::nullopt) {
  if (k_max < 1) throw config_error("k_max must be at least 1");
  const auto train_rows = assignment.rows(Partition::Training, year, &ds);
  if (train_rows.empty()) throw config_error("training partition is empty");
  k_max = std::min(k_max, train_rows.size());
  spec.k = k_max;
  const KnnModel model = fit_knn(ds, assignment, spec, year);
  const auto rows = assignment.rows(Partition::Validation, year, &ds);
  if (rows.empty()) throw numeric_error("validation partition is empty");

  std::vector<std::vector<double>> sq_err(rows.size(), std::vector<double>(k_max));
  parallel_for(rows.size(), [&](std::size_t q) {
    const auto z = standardize(model, features_of(ds[rows[q]], model.predictors));
    const auto nb = nearest(model, z, k_max);
    const double actual = value_of(ds[rows[q]], model.target);
    for (std::size_t k = 1; k <= k_max; ++k) {
      const double e = actual - combine(model, nb, k);
      sq_err[q][k - 1] = e * e;
    }
  });

  KSelectionCurve curve;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= k_max; ++k) {
    double sse = 0.0;
    for (const auto& e : sq_err) sse += e[k - 1];
    const double rase = std::sqrt(sse / static_cast<double>(rows.size()));
    curve.points.emplace_back(k, rase);
    if (rase < best) {
      best = rase;
      curve.chosen_k = k;
    }
  }
  return curve;
}

struct ResidualRecord {
  std::size_t row = 0;
  int year = 0;
  Partition partition = Partition::Training;
  double actual = 0.0;
  double predicted = 0.0;
  double residual = 0.0;
};

// Residual (actual - predicted) for every record the model covers: all rows,
// or one year's rows for a per-year model.
inline std::vector<ResidualRecord> residuals(const KnnModel& model, const Dataset& ds,
                                             const SplitAssignment& assignment,
                                             std::optional<int> year = std::nullopt) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!year || ds[i].year == *year) rows.push_back(i);
  }
  const auto pred = predict_rows(model, ds, rows);
  std::vector<ResidualRecord> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double actual = value_of(ds[rows[i]], model.target);
    out[i] = {rows[i], ds[rows[i]].year, assignment.labels[rows[i]], actual, pred[i], actual - pred[i]};
  }
  return out;
}

// Metrics per partition plus "Total" over all rows, from per-row predictions.
struct PartitionMetrics {
  std::array<EvalMetrics, 3> by_partition;
  EvalMetrics total;

  const EvalMetrics& operator[](Partition p) const { return by_partition[static_cast<std::size_t>(p)]; }
};

inline PartitionMetrics partition_metrics(const Dataset& ds, const SplitAssignment& assignment,
                                          std::span<const std::size_t> rows, std::span<const double> predicted,
                                          Variable target) {
  std::array<std::vector<double>, 3> act;
  std::array<std::vector<double>, 3> pred;
  std::vector<double> all_act;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto part = static_cast<std::size_t>(assignment.labels[rows[i]]);
    const double a = value_of(ds[rows[i]], target);
    act[part].push_back(a);
    pred[part].push_back(predicted[i]);
    all_act.push_back(a);
  }
  PartitionMetrics pm;
  for (std::size_t p = 0; p < 3; ++p) {
    if (!act[p].empty()) pm.by_partition[p] = compute_metrics(act[p], pred[p]);
  }
  pm.total = compute_metrics(all_act, predicted);
  return pm;
}

struct YearModelResult {
  int year = 0;
  KSelectionCurve curve;
  PartitionMetrics metrics;
};

struct KnnComparison {
  SplitAssignment assignment;
  KnnSpec spec;  // k field unused; each model picks its own
  KSelectionCurve pooled_curve;
  PartitionMetrics pooled;
  KnnModel pooled_model;
  std::vector<YearModelResult> per_year;
  PartitionMetrics by_year;  // per-year predictions pooled across years
  std::vector<double> pooled_predictions;  // indexed by dataset row
  std::vector<double> yearly_predictions;  // indexed by dataset row
};

// One pooled model and one model per year on the same stratified split. Each
// model picks its own k on its Validation rows unless `fixed_k` is given.
inline KnnComparison knn_study(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed,
                               std::size_t k_max, KnnSpec spec = {},
                               std::optional<std::size_t> fixed_k = std::nullopt) {
  KnnComparison cmp;
  cmp.assignment = split(ds, fractions, seed);
  cmp.spec = spec;

  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);

  if (fixed_k) {
    cmp.pooled_curve.chosen_k = *fixed_k;
  } else {
    cmp.pooled_curve = select_k(ds, cmp.assignment, spec, k_max);
  }
  spec.k = cmp.pooled_curve.chosen_k;
  cmp.pooled_model = fit_knn(ds, cmp.assignment, spec);
  cmp.pooled_predictions = predict_rows(cmp.pooled_model, ds, all);
  cmp.pooled = partition_metrics(ds, cmp.assignment, all, cmp.pooled_predictions, spec.target);

  cmp.yearly_predictions.assign(ds.size(), 0.0);
  for (int year : ds.years()) {
    YearModelResult yr;
    yr.year = year;
    if (fixed_k) {
      yr.curve.chosen_k = *fixed_k;
    } else {
      yr.curve = select_k(ds, cmp.assignment, spec, k_max, year);
    }
    KnnSpec ys = spec;
    ys.k = yr.curve.chosen_k;
    const KnnModel model = fit_knn(ds, cmp.assignment, ys, year);
    const auto rows = ds.rows_of_year(year);
    const auto pred = predict_rows(model, ds, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) cmp.yearly_predictions[rows[i]] = pred[i];
    yr.metrics = partition_metrics(ds, cmp.assignment, rows, pred, spec.target);
    cmp.per_year.push_back(std::move(yr));
  }
  // Aggregate in year-then-file order, matching how the per-year models ran.
  std::vector<std::size_t> ordered;
  std::vector<double> ordered_pred;
  for (int year : ds.years()) {
    for (auto i : ds.rows_of_year(year)) {
      ordered.push_back(i);
      ordered_pred.push_back(cmp.yearly_predictions[i]);
    }
  }
  cmp.by_year = partition_metrics(ds, cmp.assignment, ordered, ordered_pred, spec.target);
  return cmp;
}

inline KnnComparison compare_pooled_vs_yearly(const Dataset& ds, const SplitFractions& fractions,
                                              std::uint64_t seed, std::size_t k_max, KnnSpec spec = {}) {
  if (ds.years().size() < 2) throw config_error("pooled vs yearly comparison needs at least 2 years");
  return knn_study(ds, fractions, seed, k_max, std::move(spec));
}

}  // namespace pems
