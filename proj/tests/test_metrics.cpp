#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "amore/metrics.hpp"
#include "amore/rng.hpp"

using namespace amore::metrics;
using amore::Rng;

namespace {

// all permutations of k labels, applied to pred; used as exhaustive matching oracle
double best_permutation_accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                                 int k) {
  std::vector<int> perm(k);
  for (int i = 0; i < k; ++i) perm[i] = i;
  double best = 0.0;
  do {
    int correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += perm[pred[i]] == truth[i];
    best = std::max(best, static_cast<double>(correct) / pred.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("nmi conventions") {
  const std::vector<int> a = {0, 0, 1, 1};
  CHECK(nmi(a, a) == doctest::Approx(1.0));
  const std::vector<int> relabeled = {1, 1, 0, 0};
  CHECK(nmi(relabeled, a) == doctest::Approx(1.0));
  const std::vector<int> indep = {0, 0, 1, 1};
  const std::vector<int> cross = {0, 1, 0, 1};
  CHECK(nmi(indep, cross) == doctest::Approx(0.0));
  const std::vector<int> ones = {0, 0, 0, 0};
  CHECK(nmi(ones, ones) == 1.0);   // both single-cluster, identical partitions
  CHECK(nmi(ones, a) == 0.0);      // one side constant, partitions differ
  CHECK_THROWS_AS(nmi(a, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("ari conventions and brute-force pair counting") {
  const std::vector<int> a = {0, 0, 1, 1};
  CHECK(ari(a, a) == doctest::Approx(1.0));
  CHECK(ari(std::vector<int>{1, 1, 0, 0}, a) == doctest::Approx(1.0));

  // independent partitions: enumerate all pairs by hand
  const std::vector<int> p = {0, 0, 1, 1};
  const std::vector<int> t = {0, 1, 0, 1};
  long both = 0, same_p = 0, same_t = 0, n = 4;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool sp = p[i] == p[j], st = t[i] == t[j];
      both += sp && st;
      same_p += sp;
      same_t += st;
    }
  const double total = n * (n - 1) / 2.0;
  const double expected = same_p * same_t / total;
  const double maxidx = 0.5 * (same_p + same_t);
  CHECK(ari(p, t) == doctest::Approx((both - expected) / (maxidx - expected)).epsilon(1e-12));
}

TEST_CASE("hungarian matching recovers swapped labels and beats identity") {
  const std::vector<int> pred = {1, 1, 0, 0};
  const std::vector<int> truth = {0, 0, 1, 1};
  const auto s = hungarian_accuracy_f1(pred, truth, 2, 2);
  CHECK(s.accuracy == doctest::Approx(1.0));
  CHECK(s.f1 == doctest::Approx(1.0));
  CHECK(s.matching == std::vector<int>{1, 0});

  const std::vector<int> onelabel = {0, 0, 0, 0};
  const auto s2 = hungarian_accuracy_f1(onelabel, truth, 2, 2);
  CHECK(s2.accuracy == doctest::Approx(0.5));
}

TEST_CASE("hungarian equals exhaustive assignment on random small instances") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 3;
    const int n = 6 + trial % 5;
    std::vector<int> pred(n), truth(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = rng.uniform_int(0, k - 1);
      truth[i] = rng.uniform_int(0, k - 1);
    }
    const auto s = hungarian_accuracy_f1(pred, truth, k, k);
    CHECK(s.accuracy == doctest::Approx(best_permutation_accuracy(pred, truth, k)).epsilon(1e-12));
  }
}

TEST_CASE("rectangular matching pads with zero weight") {
  // 3 predicted labels, 2 true labels
  const std::vector<int> pred = {0, 0, 1, 1, 2, 2};
  const std::vector<int> truth = {0, 0, 1, 1, 0, 1};
  const auto s = hungarian_accuracy_f1(pred, truth, 3, 2);
  CHECK(s.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(s.matching.size() == 3);
  int unmatched = 0;
  for (int m : s.matching) unmatched += m < 0;
  CHECK(unmatched == 1);
}

TEST_CASE("segmentation metrics are invariant to predicted label permutations") {
  Rng rng(11);
  const int k = 4, n = 40;
  std::vector<int> pred(n), truth(n);
  for (int i = 0; i < n; ++i) {
    pred[i] = rng.uniform_int(0, k - 1);
    truth[i] = rng.uniform_int(0, k - 1);
  }
  const auto base = hungarian_accuracy_f1(pred, truth, k, k);
  const int perm[4] = {2, 3, 1, 0};
  std::vector<int> renamed(n);
  for (int i = 0; i < n; ++i) renamed[i] = perm[pred[i]];
  const auto after = hungarian_accuracy_f1(renamed, truth, k, k);
  CHECK(after.accuracy == doctest::Approx(base.accuracy));
  CHECK(after.f1 == doctest::Approx(base.f1));
  CHECK(nmi(renamed, truth) == doctest::Approx(nmi(pred, truth)).epsilon(1e-12));
  CHECK(ari(renamed, truth) == doctest::Approx(ari(pred, truth)).epsilon(1e-12));
}

TEST_CASE("all four scores hit 1 exactly when pred is a relabeling of truth") {
  Rng rng(13);
  const int k = 3, n = 30;
  std::vector<int> truth(n), pred(n);
  for (int i = 0; i < n; ++i) truth[i] = rng.uniform_int(0, k - 1);
  const int perm[3] = {1, 2, 0};
  for (int i = 0; i < n; ++i) pred[i] = perm[truth[i]];
  const auto s = hungarian_accuracy_f1(pred, truth, k, k);
  CHECK(s.accuracy == 1.0);
  CHECK(s.f1 == doctest::Approx(1.0));
  CHECK(nmi(pred, truth) == doctest::Approx(1.0));
  CHECK(ari(pred, truth) == doctest::Approx(1.0));
}

TEST_CASE("rer identities") {
  std::vector<std::vector<double>> truth = {{1.0, -2.0, 0.5}, {0.0, 3.0, 0.0}};
  CHECK(rer(truth, truth) == 0.0);
  std::vector<std::vector<double>> doubled = truth;
  for (auto& row : doubled)
    for (auto& v : row) v *= 2.0;
  CHECK(rer(doubled, truth) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<std::vector<double>> zero = {{0.0, 0.0, 0.0}};
  std::vector<std::vector<double>> one = {{1.0, 0.0, 0.0}};
  CHECK_THROWS_AS(rer(one, zero), std::invalid_argument);
}

TEST_CASE("nmae and nrmse definitions") {
  // pred == truth
  std::vector<double> truth = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const auto zero = nmae_nrmse(truth, truth, 2);
  CHECK(zero.nmae == 0.0);
  CHECK(zero.nrmse == 0.0);

  // constant offset of one truth std -> NRMSE exactly 1 per dimension
  std::vector<double> pred(truth.size());
  for (int m = 0; m < 2; ++m) {
    double mean = 0.0;
    for (int t = 0; t < 3; ++t) mean += truth[t * 2 + m] / 3.0;
    double var = 0.0;
    for (int t = 0; t < 3; ++t) var += (truth[t * 2 + m] - mean) * (truth[t * 2 + m] - mean) / 3.0;
    for (int t = 0; t < 3; ++t) pred[t * 2 + m] = truth[t * 2 + m] + std::sqrt(var);
  }
  const auto off = nmae_nrmse(pred, truth, 2);
  CHECK(off.nrmse == doctest::Approx(1.0).epsilon(1e-12));

  // streaming vs two-pass oracle on random data
  Rng rng(17);
  std::vector<double> p(40), t(40);
  for (int i = 0; i < 40; ++i) {
    p[i] = rng.uniform(-2, 2);
    t[i] = rng.uniform(-2, 2);
  }
  const auto e = nmae_nrmse(p, t, 2);
  for (int m = 0; m < 2; ++m) {
    double ae = 0, at = 0, se = 0, mean = 0, var = 0;
    for (int i = 0; i < 20; ++i) mean += t[i * 2 + m] / 20.0;
    for (int i = 0; i < 20; ++i) {
      ae += std::abs(p[i * 2 + m] - t[i * 2 + m]);
      at += std::abs(t[i * 2 + m]);
      se += (p[i * 2 + m] - t[i * 2 + m]) * (p[i * 2 + m] - t[i * 2 + m]);
      var += (t[i * 2 + m] - mean) * (t[i * 2 + m] - mean);
    }
    CHECK(std::abs(e.nmae_per_dim[m] - ae / at) < 1e-12);
    CHECK(std::abs(e.nrmse_per_dim[m] - std::sqrt(se / 20.0) / std::sqrt(var / 20.0)) < 1e-12);
  }

  std::vector<double> zeros(6, 0.0);
  CHECK_THROWS_AS(nmae_nrmse(truth, zeros, 2), std::invalid_argument);
}

TEST_CASE("metric report serializes unset values as null") {
  MetricReport r;
  r.dataset = "mass_spring";
  r.method = "amore";
  r.accuracy = 0.99;
  r.seed = 7;
  const std::string j = report_to_json(r);
  CHECK(j.find("\"accuracy\": 0.99") != std::string::npos);
  CHECK(j.find("\"rer\": null") != std::string::npos);
  CHECK(j.find("\"seed\": 7") != std::string::npos);
}
