#pragma once

// Bootstrap-forest predictor screening.
//
// Each tree is grown CART-style on a bootstrap sample. A node tries m randomly
// drawn predictors (continuing down the same random order only if none of them
// admits a valid cut), takes the (predictor, cut) with the largest SSE
// reduction, and credits that reduction to the predictor. Contributions are
// summed over all splits of all trees; portions are the normalized sums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pems/common.hpp"
#include "pems/ingest.hpp"
#include "pems/random.hpp"

namespace pems {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_per_leaf = 5;
  std::optional<std::size_t> predictors_per_split;  // ceil(p / 3) when empty
  std::optional<std::size_t> bootstrap_size;        // n when empty
  std::uint64_t seed = 1;
};

// Column-major predictor table plus target.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<double> target;

  std::size_t rows() const { return target.size(); }
  std::size_t features() const { return columns.size(); }
};

struct TreeNode {
  // Internal nodes: feature/cut/children; leaves keep feature == npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t feature = npos;
  double cut = 0.0;  // left branch holds values <= cut
  double sse_reduction = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t samples = 0;
  double value = 0.0;

  bool is_leaf() const { return feature == npos; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t split_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return !n.is_leaf(); }));
  }

  std::vector<double> contributions(std::size_t features) const {
    std::vector<double> out(features, 0.0);
    for (const auto& n : nodes) {
      if (!n.is_leaf()) out[n.feature] += n.sse_reduction;
    }
    return out;
  }
};

struct TreeParams {
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_per_leaf = 1;
  std::size_t predictors_per_split = 1;
};

namespace detail {

struct SplitCandidate {
  std::size_t feature = TreeNode::npos;
  std::size_t position = 0;  // last left element within the node's sorted range
  double cut = 0.0;
  double reduction = -1.0;
};

}  // namespace detail

// Grows one tree over `sample` (row indices into `table`, duplicates allowed).
inline RegressionTree fit_regression_tree(const FeatureTable& table,
                                          std::span<const std::size_t> sample,
                                          const TreeParams& params, Rng& rng) {
  const std::size_t n = sample.size();
  const std::size_t p = table.features();
  if (n == 0) throw config_error("regression tree needs a non-empty sample");
  if (p == 0) throw config_error("regression tree needs at least one predictor");
  const std::size_t min_leaf = std::max<std::size_t>(1, params.min_samples_per_leaf);
  const std::size_t tries = std::clamp<std::size_t>(params.predictors_per_split, 1, p);

  // One ordering of sample positions per feature; node ranges stay aligned
  // across all orderings through stable partitioning.
  std::vector<std::vector<std::uint32_t>> sorted(p, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < p; ++f) {
    auto& ord = sorted[f];
    std::iota(ord.begin(), ord.end(), 0u);
    const auto& col = table.columns[f];
    std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
      return col[sample[a]] < col[sample[b]];
    });
  }

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = table.target[sample[i]];

  RegressionTree tree;
  struct Pending {
    std::size_t node;
    std::size_t begin;
    std::size_t end;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  tree.nodes.push_back({});
  stack.push_back({0, 0, n, 0});

  std::vector<char> goes_left(n, 0);
  std::vector<std::uint32_t> buffer(n);
  std::vector<std::size_t> feature_order(p);

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::size_t count = job.end - job.begin;

    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t k = job.begin; k < job.end; ++k) {
      const double v = y[sorted[0][k]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    TreeNode& node = tree.nodes[job.node];
    node.samples = count;
    node.value = sum / static_cast<double>(count);

    const bool depth_exhausted = params.max_depth && job.depth >= *params.max_depth;
    if (depth_exhausted || count < 2 * min_leaf || lo == hi) continue;

    std::iota(feature_order.begin(), feature_order.end(), 0);
    rng.shuffle(std::span<std::size_t>(feature_order));

    detail::SplitCandidate best;
    for (std::size_t t = 0; t < p; ++t) {
      if (t >= tries && best.feature != TreeNode::npos) break;
      const std::size_t f = feature_order[t];
      const auto& ord = sorted[f];
      const auto& col = table.columns[f];
      double left_sum = 0.0;
      for (std::size_t k = job.begin; k + 1 < job.end; ++k) {
        left_sum += y[ord[k]];
        const std::size_t n_left = k + 1 - job.begin;
        const std::size_t n_right = count - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        const double x_here = col[sample[ord[k]]];
        const double x_next = col[sample[ord[k + 1]]];
        if (!(x_here < x_next)) continue;
        const double mean_left = left_sum / static_cast<double>(n_left);
        const double mean_right = (sum - left_sum) / static_cast<double>(n_right);
        const double diff = mean_left - mean_right;
        const double reduction = static_cast<double>(n_left) * static_cast<double>(n_right) /
                                 static_cast<double>(count) * diff * diff;
        if (reduction > best.reduction) {
          best = {f, k, x_here + (x_next - x_here) / 2.0, reduction};
        }
      }
    }
    if (best.feature == TreeNode::npos) continue;

    const auto& split_ord = sorted[best.feature];
    for (std::size_t k = job.begin; k < job.end; ++k) goes_left[split_ord[k]] = k <= best.position;
    const std::size_t mid = best.position + 1;
    for (std::size_t f = 0; f < p; ++f) {
      auto& ord = sorted[f];
      std::size_t l = job.begin;
      std::size_t r = 0;
      for (std::size_t k = job.begin; k < job.end; ++k) {
        if (goes_left[ord[k]]) {
          ord[l++] = ord[k];
        } else {
          buffer[r++] = ord[k];
        }
      }
      std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(r), ord.begin() + static_cast<std::ptrdiff_t>(l));
    }

    const std::size_t left_id = tree.nodes.size();
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    TreeNode& parent = tree.nodes[job.node];
    parent.feature = best.feature;
    parent.cut = best.cut;
    parent.sse_reduction = best.reduction;
    parent.left = left_id;
    parent.right = left_id + 1;
    // Right child pushed first so the left subtree is grown first.
    stack.push_back({left_id + 1, mid, job.end, job.depth + 1});
    stack.push_back({left_id, job.begin, mid, job.depth + 1});
  }
  return tree;
}

struct PredictorScore {
  std::string name;
  double contribution = 0.0;
  double portion = 0.0;
  std::size_t rank = 0;
};

struct ScreeningResult {
  std::vector<PredictorScore> scores;  // input predictor order
  std::size_t trees = 0;

  std::vector<PredictorScore> ranked() const {
    auto out = scores;
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    return out;
  }

  const PredictorScore& score(std::string_view name) const {
    for (const auto& s : scores) {
      if (s.name == name) return s;
    }
    throw config_error("predictor not screened: " + std::string(name));
  }
};

inline FeatureTable make_feature_table(const Dataset& ds, const std::vector<Variable>& predictors,
                                       Variable target) {
  FeatureTable t;
  t.names = names_of(predictors);
  for (auto v : predictors) t.columns.push_back(ds.column(v));
  t.target = ds.column(target);
  return t;
}

inline ScreeningResult screen_predictors(const FeatureTable& table, const ForestConfig& cfg) {
  const std::size_t p = table.features();
  const std::size_t n = table.rows();
  if (p == 0) throw config_error("screening needs at least one predictor");
  if (cfg.n_trees == 0) throw config_error("forest needs at least one tree");
  if (cfg.min_samples_per_leaf == 0) throw config_error("min samples per leaf must be >= 1");
  const std::size_t m = cfg.predictors_per_split.value_or((p + 2) / 3);
  if (m < 1 || m > p) throw config_error("predictors per split must lie in [1, p]");
  if (n < 2) throw numeric_error("screening needs at least 2 records");
  {
    const auto [lo, hi] = std::minmax_element(table.target.begin(), table.target.end());
    if (*lo == *hi) throw numeric_error("screening target has zero variance");
  }
  const std::size_t draws = cfg.bootstrap_size.value_or(n);
  if (draws == 0) throw config_error("bootstrap sample size must be positive");

  TreeParams params{cfg.max_depth, cfg.min_samples_per_leaf, m};
  std::vector<std::vector<double>> per_tree(cfg.n_trees);
  parallel_for(cfg.n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, kTreeStream + t));
    std::vector<std::size_t> sample(draws);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
    per_tree[t] = fit_regression_tree(table, sample, params, rng).contributions(p);
  });

  ScreeningResult result;
  result.trees = cfg.n_trees;
  result.scores.resize(p);
  double total = 0.0;
  for (std::size_t f = 0; f < p; ++f) {
    result.scores[f].name = table.names[f];
    for (const auto& tree : per_tree) result.scores[f].contribution += tree[f];
    total += result.scores[f].contribution;
  }
  for (auto& s : result.scores) s.portion = total > 0.0 ? s.contribution / total : 0.0;

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.scores[a].contribution > result.scores[b].contribution;
  });
  for (std::size_t r = 0; r < p; ++r) result.scores[order[r]].rank = r + 1;
  return result;
}

inline ScreeningResult screen_predictors(const Dataset& ds, const std::vector<Variable>& predictors,
                                         Variable target, const ForestConfig& cfg) {
  if (predictors.empty()) throw config_error("screening needs at least one predictor");
  return screen_predictors(make_feature_table(ds, predictors, target), cfg);
}

}  // namespace pems
