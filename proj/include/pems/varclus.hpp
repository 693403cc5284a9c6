#pragma once

// Divisive clustering of variables by principal components.
//
// Starting from one cluster holding every variable, the cluster with the
// largest second eigenvalue at or above the threshold is split along its first two
// (unrotated) components, followed by reassignment passes that move each
// variable to the cluster component it correlates with most strongly. All
// quantities derive from the full correlation matrix: for a cluster S with
// leading eigenpair (l, v) of R[S,S], the component score is sum_j v_j z_j,
// so corr(x_i, component) = (R[i,S] v) / sqrt(l).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pems/common.hpp"
#include "pems/ingest.hpp"
#include "pems/linalg.hpp"
#include "pems/stats.hpp"

namespace pems {

struct VarCluster {
  std::size_t id = 0;  // 1-based in reports
  std::vector<std::string> members;
  std::vector<double> loadings;  // first component, aligned with members
  double eigenvalue1 = 0.0;
  std::optional<double> eigenvalue2;  // absent for singletons
  bool process_dependent = false;
};

struct VarClusterMember {
  std::string name;
  std::size_t cluster = 0;
  double r2_own = 0.0;
  double r2_next = 0.0;
  double ratio = 0.0;  // (1 - r2_own) / (1 - r2_next)
};

struct VarClusterReport {
  std::vector<VarCluster> clusters;
  // Ordered by cluster id, then by r2_own descending.
  std::vector<VarClusterMember> members;
  std::size_t splits = 0;
  std::size_t reassignment_passes = 0;

  const VarClusterMember& member(std::string_view name) const {
    for (const auto& m : members) {
      if (m.name == name) return m;
    }
    throw config_error("variable not clustered: " + std::string(name));
  }
};

inline constexpr std::size_t kMaxReassignmentPasses = 100;

inline double second_eigenvalue(const Matrix& corr) {
  if (corr.rows() < 2 || corr.rows() != corr.cols()) {
    throw config_error("second eigenvalue needs a square matrix of size >= 2");
  }
  if (!is_symmetric(corr)) throw numeric_error("second eigenvalue of a non-symmetric matrix");
  return eigen_symmetric(corr).values[1];
}

inline double second_eigenvalue(const CorrelationMatrix& corr) {
  return second_eigenvalue(corr.values);
}

inline double one_minus_r2_ratio(double r2_own, double r2_next) {
  const double num = 1.0 - r2_own;
  const double den = 1.0 - r2_next;
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

namespace detail {

struct ClusterState {
  std::vector<std::size_t> members;  // indices into the correlation matrix, ascending
  SymmetricEigen eigen;

  double lambda2() const { return members.size() < 2 ? 0.0 : eigen.values[1]; }
};

inline void refresh(ClusterState& c, const Matrix& r) {
  std::sort(c.members.begin(), c.members.end());
  c.eigen = eigen_symmetric(r.submatrix(c.members));
}

// Squared correlation of variable i with the k-th component of cluster c.
inline double sq_corr(const Matrix& r, const ClusterState& c, std::size_t i, std::size_t k = 0) {
  const double lambda = c.eigen.values[k];
  if (lambda <= 0.0) return 0.0;
  double cov = 0.0;
  for (std::size_t j = 0; j < c.members.size(); ++j) cov += r(i, c.members[j]) * c.eigen.vectors(j, k);
  return std::min(1.0, cov * cov / lambda);
}

}  // namespace detail

inline VarClusterReport cluster_variables(const CorrelationMatrix& corr, double threshold) {
  using detail::ClusterState;
  const std::size_t p = corr.names.size();
  if (p < 2) throw config_error("variable clustering needs at least 2 variables");
  if (!(threshold > 0.0)) throw config_error("clustering threshold must be positive");
  const Matrix& r = corr.values;

  std::vector<ClusterState> clusters(1);
  clusters[0].members.resize(p);
  std::iota(clusters[0].members.begin(), clusters[0].members.end(), 0);
  detail::refresh(clusters[0], r);

  VarClusterReport report;
  std::vector<std::size_t> owner(p, 0);

  while (true) {
    // A second eigenvalue equal to the threshold up to rounding still splits,
    // so exactly independent variables (lambda2 = 1) separate at threshold 1.
    const double cutoff = threshold * (1.0 - 1e-9);
    std::size_t pick = clusters.size();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].members.size() >= 2 && clusters[c].lambda2() >= cutoff && clusters[c].lambda2() > best) {
        best = clusters[c].lambda2();
        pick = c;
      }
    }
    if (pick == clusters.size()) break;

    // Split along the first two components.
    ClusterState& parent = clusters[pick];
    std::vector<std::size_t> first;
    std::vector<std::size_t> second;
    for (std::size_t i : parent.members) {
      const double to_first = detail::sq_corr(r, parent, i, 0);
      const double to_second = detail::sq_corr(r, parent, i, 1);
      (to_second > to_first ? second : first).push_back(i);
    }
    if (second.empty() || first.empty()) {
      // Degenerate orientation: peel off the variable closest to component two.
      auto& from = first.empty() ? second : first;
      auto& to = first.empty() ? first : second;
      auto closest = std::max_element(from.begin(), from.end(), [&](std::size_t a, std::size_t b) {
        return detail::sq_corr(r, parent, a, 1) < detail::sq_corr(r, parent, b, 1);
      });
      to.push_back(*closest);
      from.erase(closest);
    }
    parent.members = first;
    detail::refresh(parent, r);
    ClusterState child;
    child.members = second;
    detail::refresh(child, r);
    clusters.push_back(std::move(child));
    ++report.splits;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      for (std::size_t i : clusters[c].members) owner[i] = c;
    }

    // Reassignment until a full pass moves nothing.
    std::size_t passes = 0;
    while (true) {
      if (++passes > kMaxReassignmentPasses) {
        throw numeric_error("variable reassignment did not converge within " +
                            std::to_string(kMaxReassignmentPasses) + " passes");
      }
      bool moved = false;
      for (std::size_t i = 0; i < p; ++i) {
        const std::size_t from = owner[i];
        if (clusters[from].members.size() < 2) continue;
        std::size_t target = from;
        double target_r2 = detail::sq_corr(r, clusters[from], i);
        for (std::size_t c = 0; c < clusters.size(); ++c) {
          if (c == from) continue;
          const double r2 = detail::sq_corr(r, clusters[c], i);
          if (r2 > target_r2 || (r2 == target_r2 && c < target)) {
            target = c;
            target_r2 = r2;
          }
        }
        if (target == from) continue;
        auto& src = clusters[from].members;
        src.erase(std::find(src.begin(), src.end(), i));
        clusters[target].members.push_back(i);
        detail::refresh(clusters[from], r);
        detail::refresh(clusters[target], r);
        owner[i] = target;
        moved = true;
      }
      if (!moved) break;
    }
    report.reassignment_passes += passes;
  }

  // Number clusters by size (largest first), ties by their smallest member index.
  std::vector<std::size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (clusters[a].members.size() != clusters[b].members.size()) {
      return clusters[a].members.size() > clusters[b].members.size();
    }
    return clusters[a].members.front() < clusters[b].members.front();
  });

  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const ClusterState& c = clusters[order[rank]];
    VarCluster vc;
    vc.id = rank + 1;
    vc.eigenvalue1 = c.eigen.values[0];
    if (c.members.size() >= 2) vc.eigenvalue2 = c.eigen.values[1];
    std::size_t process = 0;
    for (std::size_t j = 0; j < c.members.size(); ++j) {
      vc.members.push_back(corr.names[c.members[j]]);
      vc.loadings.push_back(c.eigen.vectors(j, 0));
      auto v = parse_variable(corr.names[c.members[j]]);
      if (v && !is_weather(*v)) ++process;
    }
    vc.process_dependent = 2 * process > c.members.size();

    std::vector<VarClusterMember> rows;
    for (std::size_t i : c.members) {
      VarClusterMember m;
      m.name = corr.names[i];
      m.cluster = vc.id;
      m.r2_own = c.members.size() == 1 ? 1.0 : detail::sq_corr(r, c, i);
      for (std::size_t other = 0; other < clusters.size(); ++other) {
        if (other == order[rank]) continue;
        m.r2_next = std::max(m.r2_next, detail::sq_corr(r, clusters[other], i));
      }
      m.ratio = one_minus_r2_ratio(m.r2_own, m.r2_next);
      rows.push_back(m);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.r2_own > b.r2_own; });
    report.members.insert(report.members.end(), rows.begin(), rows.end());
    report.clusters.push_back(std::move(vc));
  }
  return report;
}

inline VarClusterReport cluster_variables(const Dataset& ds, const std::vector<Variable>& vars,
                                          double threshold = 1.0) {
  if (vars.size() < 2) throw config_error("variable clustering needs at least 2 variables");
  if (!(threshold > 0.0)) throw config_error("clustering threshold must be positive");
  return cluster_variables(correlation_matrix(ds, vars), threshold);
}

}  // namespace pems
