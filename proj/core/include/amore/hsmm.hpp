#pragma once

#include <span>
#include <vector>

#include "amore/ad/tape.hpp"

namespace amore::hsmm {

// The explicit-duration forward recursion written once, generic over a scalar
// engine: PlainEngine computes doubles, TapeEngine builds the same graph out
// of autodiff nodes. Structural zeros (unreachable counts, forbidden resets)
// are handled by explicit index bounds, never by -inf sentinels, so the tape
// variant stays differentiable everywhere.

struct PlainEngine {
  using S = double;
  S constant(double v) const { return v; }
  S add(S a, S b) const { return a + b; }
  S add3(S a, S b, S c) const { return a + b + c; }
  S sub(S a, S b) const { return a - b; }
  S mul_const(S a, double c) const { return a * c; }
  S lse(std::span<const S> xs) const { return ad::logsumexp(xs); }
  double value(S a) const { return a; }
};

struct TapeEngine {
  using S = ad::Var;
  ad::Tape* tape = nullptr;
  S constant(double v) const { return tape->constant(v); }
  S add(S a, S b) const { return tape->add(a, b); }
  S add3(S a, S b, S c) const { return tape->add3(a, b, c); }
  S sub(S a, S b) const { return tape->sub(a, b); }
  S mul_const(S a, double c) const { return tape->mul_const(a, c); }
  S lse(std::span<const S> xs) const { return tape->logsumexp(xs); }
  double value(S a) const { return tape->value(a); }
};

// Local log-probabilities of the chain. Count value c (1-based) lives at
// index c-1. log_mu is defined for counts in [d_min, d_max-1] (below d_min
// continuation is forced, log 1 contributions are skipped); log_1m_mu is
// defined for counts in [d_min, d_max].
template <class Eng>
struct Inputs {
  using S = typename Eng::S;
  int steps = 0;       // T
  int num_modes = 0;   // K
  int d_min = 1;
  int d_max = 1;
  bool use_counts = true;
  std::vector<S> log_pi;     // K
  std::vector<S> init_ll;    // K
  std::vector<S> em;         // (T-1) x K, emission log-lik of step t given t-1
  std::vector<S> log_trans;  // (T-1) x K x K, [t][from][to], row log-stochastic
  std::vector<S> log_mu;     // K x d_max
  std::vector<S> log_1m_mu;  // K x d_max

  S emission(int t, int k) const { return em[static_cast<std::size_t>(t - 1) * num_modes + k]; }
  S trans(int t, int from, int to) const {
    return log_trans[(static_cast<std::size_t>(t - 1) * num_modes + from) * num_modes + to];
  }
  S mu(int k, int cidx) const { return log_mu[static_cast<std::size_t>(k) * d_max + cidx]; }
  S one_minus_mu(int k, int cidx) const {
    return log_1m_mu[static_cast<std::size_t>(k) * d_max + cidx];
  }
};

// Runs the forward pass and returns the total log-likelihood.
// When `alpha` is non-null it receives T x K x d_max entries (only reachable
// count indices are written; `reach` records which, as T x d_max flags).
// When `filtered` is non-null it receives T x K per-step filtered mode
// log-marginals (normalized).
template <class Eng>
typename Eng::S forward(Eng& eng, const Inputs<Eng>& in,
                        std::vector<typename Eng::S>* alpha = nullptr,
                        std::vector<char>* reach = nullptr,
                        std::vector<typename Eng::S>* filtered = nullptr) {
  using S = typename Eng::S;
  const int T = in.steps, K = in.num_modes;

  if (!in.use_counts) {
    std::vector<S> prev(K), cur(K), terms(K);
    for (int k = 0; k < K; ++k) prev[k] = eng.add(in.log_pi[k], in.init_ll[k]);
    auto emit_filtered = [&](const std::vector<S>& a) {
      if (!filtered) return;
      S norm = eng.lse(a);
      for (int k = 0; k < K; ++k) filtered->push_back(eng.sub(a[k], norm));
    };
    auto emit_alpha = [&](const std::vector<S>& a, int /*t*/) {
      if (!alpha) return;
      for (int k = 0; k < K; ++k) alpha->push_back(a[k]);
    };
    emit_alpha(prev, 0);
    emit_filtered(prev);
    for (int t = 1; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        for (int j = 0; j < K; ++j) terms[j] = eng.add(prev[j], in.trans(t, j, k));
        cur[k] = eng.add(eng.lse(terms), in.emission(t, k));
      }
      prev.swap(cur);
      emit_alpha(prev, t);
      emit_filtered(prev);
    }
    return eng.lse(prev);
  }

  const int D = in.d_max;
  std::vector<S> a_prev(static_cast<std::size_t>(K) * D), a_cur(a_prev.size());
  std::vector<char> r_prev(D, 0), r_cur(D, 0);
  std::vector<S> terms, resetmass(K), rowterms(K);
  terms.reserve(D);

  auto emit = [&](const std::vector<S>& a, const std::vector<char>& r) {
    if (alpha) {
      for (std::size_t i = 0; i < a.size(); ++i) alpha->push_back(a[i]);
    }
    if (reach) {
      for (int c = 0; c < D; ++c) reach->push_back(r[c]);
    }
    if (filtered) {
      std::vector<S> marg(K);
      std::vector<S> all;
      for (int k = 0; k < K; ++k) {
        terms.clear();
        for (int c = 0; c < D; ++c)
          if (r[c]) terms.push_back(a[static_cast<std::size_t>(k) * D + c]);
        marg[k] = eng.lse(terms);
        all.push_back(marg[k]);
      }
      S norm = eng.lse(all);
      for (int k = 0; k < K; ++k) filtered->push_back(eng.sub(marg[k], norm));
    }
  };

  for (int k = 0; k < K; ++k)
    a_prev[static_cast<std::size_t>(k) * D + 0] = eng.add(in.log_pi[k], in.init_ll[k]);
  r_prev[0] = 1;
  emit(a_prev, r_prev);

  for (int t = 1; t < T; ++t) {
    bool can_reset = false;
    for (int c = in.d_min - 1; c < D; ++c) can_reset |= (r_prev[c] != 0);

    if (can_reset) {
      for (int j = 0; j < K; ++j) {
        terms.clear();
        for (int c = in.d_min - 1; c < D; ++c) {
          if (!r_prev[c]) continue;
          terms.push_back(eng.add(a_prev[static_cast<std::size_t>(j) * D + c],
                                  in.one_minus_mu(j, c)));
        }
        resetmass[j] = eng.lse(terms);
      }
    }

    std::fill(r_cur.begin(), r_cur.end(), 0);
    for (int k = 0; k < K; ++k) {
      if (can_reset) {
        for (int j = 0; j < K; ++j) rowterms[j] = eng.add(resetmass[j], in.trans(t, j, k));
        a_cur[static_cast<std::size_t>(k) * D + 0] =
            eng.add(eng.lse(rowterms), in.emission(t, k));
        r_cur[0] = 1;
      }
      for (int c = 1; c < D; ++c) {
        const int src = c - 1;
        if (!r_prev[src]) continue;
        const int src_count = src + 1;
        const S base = a_prev[static_cast<std::size_t>(k) * D + src];
        if (src_count >= in.d_min) {
          a_cur[static_cast<std::size_t>(k) * D + c] =
              eng.add3(base, in.mu(k, src), in.emission(t, k));
        } else {
          a_cur[static_cast<std::size_t>(k) * D + c] = eng.add(base, in.emission(t, k));
        }
        r_cur[c] = 1;
      }
    }
    a_prev.swap(a_cur);
    r_prev.swap(r_cur);
    emit(a_prev, r_prev);
  }

  terms.clear();
  std::vector<S> all;
  for (int k = 0; k < K; ++k)
    for (int c = 0; c < D; ++c)
      if (r_prev[c]) all.push_back(a_prev[static_cast<std::size_t>(k) * D + c]);
  return eng.lse(all);
}

// Backward pass on the full count grid (plain only). beta is T x K x d_max in
// log space; entries for forward-unreachable states are computed but unused.
std::vector<double> backward_plain(const Inputs<PlainEngine>& in);

}  // namespace amore::hsmm
