#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace amore::metrics {

// Normalized mutual information I(pred; truth) / sqrt(H(pred) H(truth)) from
// empirical joint counts. Both single-cluster and identical -> 1; one side
// constant while the partitions differ -> 0.
double nmi(std::span<const int> pred, std::span<const int> truth);

// Adjusted Rand index (pair counting, expected-value corrected). Identical
// partitions -> 1 (including the degenerate single-cluster case).
double ari(std::span<const int> pred, std::span<const int> truth);

struct SegScore {
  double nmi = 0.0;
  double ari = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  // matching[p] = true label assigned to predicted label p (-1 when unmatched)
  std::vector<int> matching;
};

// Maximum-overlap assignment of predicted to true labels (rectangular case
// padded with zero weight), then frame accuracy and macro-F1 over true classes.
SegScore hungarian_accuracy_f1(std::span<const int> pred, std::span<const int> truth,
                               int k_pred, int k_true);

// Solves max-weight assignment on a k x k matrix; returns column for each row.
std::vector<int> max_weight_assignment(const std::vector<double>& weights, int k);

// Mean over steps of ||learned_t - truth_t||_2 / ||truth_t||_2. Vectors must
// be aligned to a common term set (zero-padded) by the caller.
double rer(const std::vector<std::vector<double>>& learned,
           const std::vector<std::vector<double>>& truth);

struct ForecastError {
  std::vector<double> nmae_per_dim;
  std::vector<double> nrmse_per_dim;
  double nmae = 0.0;   // average over dimensions
  double nrmse = 0.0;  // average over dimensions
};

// NMAE = sum|pred-truth| / sum|truth|; NRMSE = rmse / std(truth), per output
// dimension and averaged. Arrays are [steps x dims], row-major.
ForecastError nmae_nrmse(std::span<const double> pred, std::span<const double> truth, int dims);

struct MetricReport {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  std::string dataset;
  std::string method;
  double nmi = kUnset;
  double ari = kUnset;
  double accuracy = kUnset;
  double f1 = kUnset;
  double rer = kUnset;
  double nmae = kUnset;
  double nrmse = kUnset;
  std::uint64_t seed = 0;
};

// JSON object {dataset, method, nmi, ari, accuracy, f1, rer, nmae, nrmse, seed};
// unset (NaN) values serialize as null.
std::string report_to_json(const MetricReport& report);

}  // namespace amore::metrics
