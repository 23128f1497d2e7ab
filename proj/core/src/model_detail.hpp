#pragma once

// Shared internals between the single-object model and the multi-object
// extension: both parameterize initial states, duration hazards and
// basis-regression emissions the same way (the multi-object model swaps the
// mode-transition construction). Not installed.

#include <cmath>
#include <span>
#include <vector>

#include "amore/ad/tape.hpp"
#include "amore/basis.hpp"
#include "amore/hsmm.hpp"
#include "amore/model.hpp"

namespace amore::detail {

using ad::Var;

// Smoothing (alpha-beta, gamma, decode) from prebuilt chain inputs; shared by
// the single-object model and the per-object multi-object inference.
PosteriorSummary smooth_from_inputs(const hsmm::Inputs<hsmm::PlainEngine>& in, bool want_joint);

// JSON form of an AmoreConfig (with state_dim), reused by both checkpoints.
std::string amore_meta_json(const AmoreConfig& cfg, int state_dim);

// log S(c) = log sum_{d=c}^{d_max} exp(h_d), running logaddexp from the tail.
inline std::vector<double> suffix_logsum(std::span<const double> h) {
  std::vector<double> s(h.size());
  double acc = h[h.size() - 1];
  s[h.size() - 1] = acc;
  for (int i = static_cast<int>(h.size()) - 2; i >= 0; --i) {
    const double mx = std::max(h[i], acc);
    acc = mx + std::log(std::exp(h[i] - mx) + std::exp(acc - mx));
    s[i] = acc;
  }
  return s;
}

// Fills K x d_max tables (count c at index c-1): log mu for c in
// [d_min, d_max-1], log(1-mu) for c in [d_min, d_max]. Entries outside those
// ranges are never read by the recursion.
inline void count_log_tables(const ad::ParamStore& store, const AmoreConfig& cfg,
                             std::vector<double>& log_mu, std::vector<double>& log_1m) {
  const int K = cfg.num_modes, D = cfg.d_max, R = cfg.d_max - cfg.d_min + 1;
  log_mu.assign(static_cast<std::size_t>(K) * D, 0.0);
  log_1m.assign(static_cast<std::size_t>(K) * D, 0.0);
  auto hz = store.values_of("hazard");
  for (int k = 0; k < K; ++k) {
    const auto h = hz.subspan(static_cast<std::size_t>(k) * R, R);
    const auto s = suffix_logsum(h);
    for (int c = cfg.d_min; c <= cfg.d_max; ++c) {
      const int r = c - cfg.d_min;
      if (c < cfg.d_max) log_mu[static_cast<std::size_t>(k) * D + (c - 1)] = s[r + 1] - s[r];
      log_1m[static_cast<std::size_t>(k) * D + (c - 1)] = h[r] - s[r];
    }
  }
}

inline void count_log_tables_tape(ad::Tape& tape, const AmoreConfig& cfg,
                                  std::vector<Var>& log_mu, std::vector<Var>& log_1m) {
  const int K = cfg.num_modes, D = cfg.d_max, R = cfg.d_max - cfg.d_min + 1;
  log_mu.resize(static_cast<std::size_t>(K) * D);
  log_1m.resize(static_cast<std::size_t>(K) * D);
  for (int k = 0; k < K; ++k) {
    std::vector<Var> h(R), logS(R);
    for (int r = 0; r < R; ++r) h[r] = tape.param("hazard", k * R + r);
    logS[R - 1] = h[R - 1];
    for (int r = R - 2; r >= 0; --r) {
      const Var pair[] = {h[r], logS[r + 1]};
      logS[r] = tape.logsumexp(pair);
    }
    for (int c = cfg.d_min; c <= cfg.d_max; ++c) {
      const int r = c - cfg.d_min;
      if (c < cfg.d_max)
        log_mu[static_cast<std::size_t>(k) * D + (c - 1)] = tape.sub(logS[r + 1], logS[r]);
      log_1m[static_cast<std::size_t>(k) * D + (c - 1)] = tape.sub(h[r], logS[r]);
    }
  }
}

inline std::vector<Var> log_pi_tape(ad::Tape& tape, int K) {
  std::vector<Var> logits(K);
  for (int k = 0; k < K; ++k) logits[k] = tape.param("pi_logits", k);
  const Var z = tape.logsumexp(logits);
  std::vector<Var> out(K);
  for (int k = 0; k < K; ++k) out[k] = tape.sub(logits[k], z);
  return out;
}

inline std::vector<Var> init_ll_tape(ad::Tape& tape, const AmoreConfig& cfg, int M,
                                     std::span<const double> y1) {
  const int K = cfg.num_modes;
  std::vector<Var> out(K);
  for (int k = 0; k < K; ++k) {
    std::vector<Var> mean(M), stds(M);
    for (int m = 0; m < M; ++m) {
      mean[m] = tape.param("init_mean", k * M + m);
      stds[m] = tape.add_const(tape.exp(tape.param("init_log_std", k * M + m)), cfg.sigma_floor);
    }
    out[k] = tape.gaussian_logpdf(y1, mean, stds);
  }
  return out;
}

// Per-mode emission std nodes [K x M], shared across steps of a tape.
inline std::vector<Var> emission_std_tape(ad::Tape& tape, const AmoreConfig& cfg, int M) {
  const int K = cfg.num_modes;
  std::vector<Var> stds(static_cast<std::size_t>(K) * M);
  for (int k = 0; k < K; ++k)
    for (int m = 0; m < M; ++m)
      stds[static_cast<std::size_t>(k) * M + m] =
          tape.add_const(tape.exp(tape.param("emission_log_std", k * M + m)), cfg.sigma_floor);
  return stds;
}

// Mode-indexed coefficient parameter nodes, w_vars[k][m][c].
inline std::vector<std::vector<std::vector<Var>>> coeff_param_vars(ad::Tape& tape,
                                                                   const ad::ParamStore& store,
                                                                   int K, int C, int M) {
  const int off = store.offset("coeffs");
  std::vector<std::vector<std::vector<Var>>> w(K);
  for (int k = 0; k < K; ++k) {
    w[k].assign(M, std::vector<Var>(C));
    for (int c = 0; c < C; ++c)
      for (int m = 0; m < M; ++m)
        w[k][m][c] = tape.param(off + (static_cast<std::size_t>(k) * C + c) * M + m);
  }
  return w;
}

// One-step predictive mean of the candidate field on the tape.
inline std::vector<Var> emission_mean_on_tape(ad::Tape& tape, const BasisLibrary& lib,
                                              const std::vector<std::vector<Var>>& w_k,
                                              std::span<const double> y_prev,
                                              std::span<const double> theta_prev, double dt,
                                              MeanIntegrator integrator, int substeps) {
  const int M = lib.state_dim();
  const int C = lib.size();
  const double h = dt / substeps;

  if (integrator == MeanIntegrator::Euler && substeps == 1) {
    std::vector<double> coeffs(C);
    for (int c = 0; c < C; ++c) coeffs[c] = theta_prev[c] * dt;
    std::vector<Var> mean(M);
    for (int m = 0; m < M; ++m) mean[m] = tape.lincomb(y_prev[m], coeffs, w_k[m]);
    return mean;
  }

  std::vector<Var> state(M);
  for (int m = 0; m < M; ++m) state[m] = tape.constant(y_prev[m]);
  bool state_is_const = true;

  auto eval_field = [&](const std::vector<Var>& u, bool u_const) {
    std::vector<Var> f(M);
    if (u_const) {
      for (int m = 0; m < M; ++m) f[m] = tape.lincomb(0.0, theta_prev, w_k[m]);
    } else {
      const std::vector<Var> theta = evaluate_on_tape(lib, tape, u);
      for (int m = 0; m < M; ++m) f[m] = tape.dot(theta, w_k[m]);
    }
    return f;
  };

  const double half = 0.5 * h;
  for (int s = 0; s < substeps; ++s) {
    if (integrator == MeanIntegrator::Euler) {
      const auto f = eval_field(state, state_is_const);
      for (int m = 0; m < M; ++m) state[m] = tape.add(state[m], tape.mul_const(f[m], h));
    } else {
      const auto k1 = eval_field(state, state_is_const);
      std::vector<Var> u(M);
      for (int m = 0; m < M; ++m) u[m] = tape.add(state[m], tape.mul_const(k1[m], half));
      const auto k2 = eval_field(u, false);
      for (int m = 0; m < M; ++m) u[m] = tape.add(state[m], tape.mul_const(k2[m], half));
      const auto k3 = eval_field(u, false);
      for (int m = 0; m < M; ++m) u[m] = tape.add(state[m], tape.mul_const(k3[m], h));
      const auto k4 = eval_field(u, false);
      const double c6 = h / 6.0, c3 = h / 3.0;
      for (int m = 0; m < M; ++m) {
        const Var stages[] = {k1[m], k2[m], k3[m], k4[m]};
        const double cc[] = {c6, c3, c3, c6};
        state[m] = tape.add(state[m], tape.lincomb(0.0, cc, stages));
      }
    }
    state_is_const = false;
  }
  return state;
}

// Plain-double counterparts used by smoothing, forecasting and evaluation.

inline void emission_mean_plain(const BasisLibrary& lib, const CoefficientTensor& w,
                                const AmoreConfig& cfg, std::span<const double> y_prev, int mode,
                                double dt, std::span<double> out) {
  const int M = lib.state_dim();
  std::vector<double> state(y_prev.begin(), y_prev.end());
  const double h = dt / cfg.mean_substeps;
  std::vector<double> k1(M), k2(M), k3(M), k4(M), tmp(M);
  for (int s = 0; s < cfg.mean_substeps; ++s) {
    if (cfg.mean_integrator == MeanIntegrator::Euler) {
      predict_derivative(lib, w, mode, state, k1);
      for (int m = 0; m < M; ++m) state[m] += h * k1[m];
    } else {
      predict_derivative(lib, w, mode, state, k1);
      for (int m = 0; m < M; ++m) tmp[m] = state[m] + 0.5 * h * k1[m];
      predict_derivative(lib, w, mode, tmp, k2);
      for (int m = 0; m < M; ++m) tmp[m] = state[m] + 0.5 * h * k2[m];
      predict_derivative(lib, w, mode, tmp, k3);
      for (int m = 0; m < M; ++m) tmp[m] = state[m] + h * k3[m];
      predict_derivative(lib, w, mode, tmp, k4);
      for (int m = 0; m < M; ++m)
        state[m] += (h / 6.0) * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
    }
  }
  for (int m = 0; m < M; ++m) out[m] = state[m];
}

}  // namespace amore::detail
