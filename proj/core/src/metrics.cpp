#include "amore/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "json.hpp"

namespace amore::metrics {

namespace {

struct Counts {
  int kp = 0, kt = 0;
  long n = 0;
  std::vector<long> joint;  // kp x kt
  std::vector<long> rowsum, colsum;
};

Counts joint_counts(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("label sequences must have equal, positive length");
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0) throw std::invalid_argument("labels must be nonnegative");
    c.kp = std::max(c.kp, pred[i] + 1);
    c.kt = std::max(c.kt, truth[i] + 1);
  }
  c.n = static_cast<long>(pred.size());
  c.joint.assign(static_cast<std::size_t>(c.kp) * c.kt, 0);
  c.rowsum.assign(c.kp, 0);
  c.colsum.assign(c.kt, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++c.joint[static_cast<std::size_t>(pred[i]) * c.kt + truth[i]];
    ++c.rowsum[pred[i]];
    ++c.colsum[truth[i]];
  }
  return c;
}

double entropy(const std::vector<long>& counts, long n) {
  double h = 0.0;
  for (long c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const Counts c = joint_counts(pred, truth);
  const double hp = entropy(c.rowsum, c.n);
  const double ht = entropy(c.colsum, c.n);
  if (hp == 0.0 && ht == 0.0) return 1.0;  // both single-cluster partitions
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (int p = 0; p < c.kp; ++p) {
    for (int t = 0; t < c.kt; ++t) {
      const long nij = c.joint[static_cast<std::size_t>(p) * c.kt + t];
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / c.n;
      mi += pij * std::log(static_cast<double>(nij) * c.n /
                           (static_cast<double>(c.rowsum[p]) * c.colsum[t]));
    }
  }
  return mi / std::sqrt(hp * ht);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const Counts c = joint_counts(pred, truth);
  auto comb2 = [](long x) { return 0.5 * x * (x - 1); };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (long v : c.joint) sum_ij += comb2(v);
  for (long v : c.rowsum) sum_a += comb2(v);
  for (long v : c.colsum) sum_b += comb2(v);
  const double total = comb2(c.n);
  const double expected = sum_a * sum_b / total;
  const double maxidx = 0.5 * (sum_a + sum_b);
  const double denom = maxidx - expected;
  if (std::abs(denom) < 1e-12) return 1.0;  // degenerate identical partitions
  return (sum_ij - expected) / denom;
}

std::vector<int> max_weight_assignment(const std::vector<double>& weights, int k) {
  // potentials-based Hungarian algorithm on the negated weights
  const double INF = 1e18;
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
  std::vector<int> p(k + 1, 0), way(k + 1, 0);
  for (int i = 1; i <= k; ++i) {
    p[0] = i;
    int j0 = 0;
    minv.assign(k + 1, INF);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = INF;
      for (int j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = -weights[static_cast<std::size_t>(i0 - 1) * k + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> ans(k, -1);
  for (int j = 1; j <= k; ++j)
    if (p[j] > 0) ans[p[j] - 1] = j - 1;
  return ans;
}

SegScore hungarian_accuracy_f1(std::span<const int> pred, std::span<const int> truth,
                               int k_pred, int k_true) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("label sequences must have equal, positive length");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || pred[i] >= k_pred) throw std::invalid_argument("pred label out of range");
    if (truth[i] < 0 || truth[i] >= k_true) throw std::invalid_argument("true label out of range");
  }
  const int k = std::max(k_pred, k_true);
  std::vector<double> overlap(static_cast<std::size_t>(k) * k, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    overlap[static_cast<std::size_t>(pred[i]) * k + truth[i]] += 1.0;

  const auto assign = max_weight_assignment(overlap, k);

  SegScore score;
  score.nmi = nmi(pred, truth);
  score.ari = ari(pred, truth);
  score.matching.assign(k_pred, -1);
  double correct = 0.0;
  for (int p = 0; p < k_pred; ++p) {
    const int t = assign[p];
    if (t >= 0 && t < k_true) {
      score.matching[p] = t;
      correct += overlap[static_cast<std::size_t>(p) * k + t];
    }
  }
  score.accuracy = correct / static_cast<double>(pred.size());

  double f1_sum = 0.0;
  for (int t = 0; t < k_true; ++t) {
    int matched_p = -1;
    for (int p = 0; p < k_pred; ++p)
      if (score.matching[p] == t) matched_p = p;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (int p = 0; p < k_pred; ++p) {
      for (int tt = 0; tt < k_true; ++tt) {
        const double m = overlap[static_cast<std::size_t>(p) * k + tt];
        if (p == matched_p && tt == t) tp += m;
        else if (p == matched_p) fp += m;
        else if (tt == t) fn += m;
      }
    }
    if (tp > 0.0) {
      const double prec = tp / (tp + fp);
      const double rec = tp / (tp + fn);
      f1_sum += 2.0 * prec * rec / (prec + rec);
    }
  }
  score.f1 = f1_sum / k_true;
  return score;
}

double rer(const std::vector<std::vector<double>>& learned,
           const std::vector<std::vector<double>>& truth) {
  if (learned.size() != truth.size() || learned.empty())
    throw std::invalid_argument("rer: sequences must have equal, positive length");
  double sum = 0.0;
  for (std::size_t t = 0; t < learned.size(); ++t) {
    if (learned[t].size() != truth[t].size())
      throw std::invalid_argument("rer: coefficient vectors must be aligned");
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < truth[t].size(); ++i) {
      const double d = learned[t][i] - truth[t][i];
      diff2 += d * d;
      norm2 += truth[t][i] * truth[t][i];
    }
    if (norm2 == 0.0) throw std::invalid_argument("rer: zero ground-truth norm");
    sum += std::sqrt(diff2) / std::sqrt(norm2);
  }
  return sum / learned.size();
}

ForecastError nmae_nrmse(std::span<const double> pred, std::span<const double> truth, int dims) {
  if (pred.size() != truth.size() || truth.empty() || dims < 1 || truth.size() % dims != 0)
    throw std::invalid_argument("nmae_nrmse: shape mismatch");
  const std::size_t steps = truth.size() / dims;
  ForecastError err;
  err.nmae_per_dim.resize(dims);
  err.nrmse_per_dim.resize(dims);
  for (int m = 0; m < dims; ++m) {
    double abs_err = 0.0, abs_truth = 0.0, sq_err = 0.0, mean = 0.0;
    for (std::size_t t = 0; t < steps; ++t) mean += truth[t * dims + m];
    mean /= steps;
    double var = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double tr = truth[t * dims + m];
      const double d = pred[t * dims + m] - tr;
      abs_err += std::abs(d);
      abs_truth += std::abs(tr);
      sq_err += d * d;
      var += (tr - mean) * (tr - mean);
    }
    if (abs_truth == 0.0 || var == 0.0)
      throw std::invalid_argument("nmae_nrmse: degenerate truth (zero normalizer)");
    err.nmae_per_dim[m] = abs_err / abs_truth;
    err.nrmse_per_dim[m] = std::sqrt(sq_err / steps) / std::sqrt(var / steps);
    err.nmae += err.nmae_per_dim[m] / dims;
    err.nrmse += err.nrmse_per_dim[m] / dims;
  }
  return err;
}

std::string report_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  auto put = [&](const char* key, double v) {
    if (std::isnan(v)) j[key] = nullptr;
    else j[key] = v;
  };
  put("nmi", r.nmi);
  put("ari", r.ari);
  put("accuracy", r.accuracy);
  put("f1", r.f1);
  put("rer", r.rer);
  put("nmae", r.nmae);
  put("nrmse", r.nrmse);
  j["seed"] = r.seed;
  return j.dump(2);
}

}  // namespace amore::metrics
