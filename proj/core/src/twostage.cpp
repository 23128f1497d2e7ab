#include "amore/twostage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace amore::twostage {

std::vector<double> finite_difference_derivatives(const sim::Trajectory& traj, int object) {
  const int T = traj.steps, M = traj.state_dim;
  std::vector<double> d(static_cast<std::size_t>(T) * M);
  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      double v;
      if (t == 0) v = (traj.obs(1, object, m) - traj.obs(0, object, m)) / traj.dt;
      else if (t == T - 1) v = (traj.obs(T - 1, object, m) - traj.obs(T - 2, object, m)) / traj.dt;
      else v = (traj.obs(t + 1, object, m) - traj.obs(t - 1, object, m)) / (2.0 * traj.dt);
      d[static_cast<std::size_t>(t) * M + m] = v;
    }
  }
  return d;
}

std::vector<std::vector<int>> knn_cluster(const sim::Trajectory& traj, int k_neighbors,
                                          int object) {
  const int T = traj.steps, M = traj.state_dim;
  if (k_neighbors < M + 2)
    throw std::invalid_argument("knn_cluster: k_neighbors must be >= state_dim + 2");
  if (k_neighbors > T) throw std::invalid_argument("knn_cluster: k_neighbors exceeds series length");

  std::vector<std::vector<int>> clusters(T);
  std::vector<std::pair<double, int>> dist(T);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < T; ++s) {
      double d2 = 0.0;
      for (int m = 0; m < M; ++m) {
        const double d = traj.obs(t, object, m) - traj.obs(s, object, m);
        d2 += d * d;
      }
      dist[s] = {d2, s};
    }
    std::partial_sort(dist.begin(), dist.begin() + k_neighbors, dist.end());
    clusters[t].reserve(k_neighbors);
    for (int i = 0; i < k_neighbors; ++i) clusters[t].push_back(dist[i].second);
    std::sort(clusters[t].begin(), clusters[t].end());
  }
  return clusters;
}

ClusterFit fit_cluster(const sim::Trajectory& traj, std::span<const int> members,
                       const BasisLibrary& lib, double threshold, int object) {
  const int C = lib.size(), M = lib.state_dim();
  const int n = static_cast<int>(members.size());
  if (n <= C) throw std::invalid_argument("fit_cluster: cluster smaller than the basis");
  if (threshold < 0.0) throw std::invalid_argument("fit_cluster: threshold must be >= 0");

  const auto deriv = finite_difference_derivatives(traj, object);
  Mat theta(n, C), target(n, M);
  std::vector<double> row(C);
  for (int i = 0; i < n; ++i) {
    lib.evaluate(traj.state(members[i], object), row);
    for (int c = 0; c < C; ++c) theta(i, c) = row[c];
    for (int m = 0; m < M; ++m) target(i, m) = deriv[static_cast<std::size_t>(members[i]) * M + m];
  }

  ClusterFit fit;
  fit.members.assign(members.begin(), members.end());
  fit.mask.assign(C, true);
  fit.coeffs = Mat(C, M);

  // sequential thresholded least squares, whole-row mask over output dims
  for (int iter = 0; iter < 2 * C + 4; ++iter) {
    std::vector<int> active;
    for (int c = 0; c < C; ++c)
      if (fit.mask[c]) active.push_back(c);
    Mat coeffs(C, M);
    if (!active.empty()) {
      Mat sub(n, static_cast<int>(active.size()));
      for (int i = 0; i < n; ++i)
        for (std::size_t a = 0; a < active.size(); ++a) sub(i, static_cast<int>(a)) = theta(i, active[a]);
      Mat x;
      if (!lstsq(sub, target, x)) {
        fit.fallback = true;
        break;
      }
      for (std::size_t a = 0; a < active.size(); ++a)
        for (int m = 0; m < M; ++m) coeffs(active[a], m) = x(static_cast<int>(a), m);
    }
    fit.coeffs = coeffs;
    std::vector<bool> next(C, false);
    for (int c = 0; c < C; ++c) {
      double mx = 0.0;
      for (int m = 0; m < M; ++m) mx = std::max(mx, std::abs(coeffs(c, m)));
      next[c] = fit.mask[c] && mx >= threshold;
    }
    if (threshold == 0.0) break;  // plain least squares, full mask retained
    if (next == fit.mask) break;
    fit.mask = next;
  }
  if (threshold > 0.0) {
    // zero out masked rows for cleanliness
    for (int c = 0; c < C; ++c)
      if (!fit.mask[c])
        for (int m = 0; m < M; ++m) fit.coeffs(c, m) = 0.0;
  }
  return fit;
}

std::vector<int> aggregate_modes(const std::vector<ClusterFit>& clusters) {
  std::map<std::vector<bool>, int> mode_of_mask;
  // deterministic mode ids: sorted by mask pattern, independent of cluster order
  for (const auto& c : clusters) mode_of_mask.emplace(c.mask, 0);
  int next = 0;
  for (auto& [mask, id] : mode_of_mask) id = next++;
  std::vector<int> labels(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) labels[i] = mode_of_mask.at(clusters[i].mask);
  return labels;
}

TwoStageResult run(const sim::Trajectory& traj, const BasisLibrary& lib, int k_neighbors,
                   double threshold, int object) {
  TwoStageResult result;
  const auto clusters = knn_cluster(traj, k_neighbors, object);
  result.clusters.reserve(clusters.size());
  for (const auto& members : clusters)
    result.clusters.push_back(fit_cluster(traj, members, lib, threshold, object));
  result.step_modes = aggregate_modes(result.clusters);
  int mx = -1;
  for (int m : result.step_modes) mx = std::max(mx, m);
  result.mode_count = mx + 1;
  return result;
}

}  // namespace amore::twostage
