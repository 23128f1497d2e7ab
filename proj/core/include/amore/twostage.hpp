#pragma once

#include <span>
#include <vector>

#include "amore/basis.hpp"
#include "amore/linalg.hpp"
#include "amore/sim/simulate.hpp"

namespace amore::twostage {

// One fitted local cluster: member step indices, dense coefficients from the
// final masked fit [C x M], and the active-term mask over the library.
struct ClusterFit {
  std::vector<int> members;
  Mat coeffs;
  std::vector<bool> mask;
  bool fallback = false;  // rank-deficient refit reverted to the previous mask
};

// For each step t, the k nearest neighbors of y_t in state space (self
// included, distance ties broken toward the lower index).
std::vector<std::vector<int>> knn_cluster(const sim::Trajectory& traj, int k_neighbors,
                                          int object = 0);

// Sequential thresholded least squares of finite-difference derivatives onto
// the basis library over the cluster's members.
ClusterFit fit_cluster(const sim::Trajectory& traj, std::span<const int> members,
                       const BasisLibrary& lib, double threshold, int object = 0);

// Groups clusters by identical active-term mask; each group is one mode.
// Returns the per-step mode label (clusters are per-step, cluster i owns step i).
std::vector<int> aggregate_modes(const std::vector<ClusterFit>& clusters);

struct TwoStageResult {
  std::vector<ClusterFit> clusters;  // one per step
  std::vector<int> step_modes;
  int mode_count = 0;
};

TwoStageResult run(const sim::Trajectory& traj, const BasisLibrary& lib, int k_neighbors,
                   double threshold, int object = 0);

// Central-difference derivative targets (one-sided at the ends), [T x M].
std::vector<double> finite_difference_derivatives(const sim::Trajectory& traj, int object = 0);

}  // namespace amore::twostage
