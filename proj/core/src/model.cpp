#include "amore/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "amore/errors.hpp"
#include "amore/hsmm.hpp"

#include "model_detail.hpp"

namespace amore {

using ad::Var;

// ---------------------------------------------------------------------------
// hsmm backward pass (plain, full count grid)

namespace hsmm {

std::vector<double> backward_plain(const Inputs<PlainEngine>& in) {
  if (!in.use_counts) throw std::logic_error("backward_plain: count-free variant handled separately");
  const int T = in.steps, K = in.num_modes, D = in.d_max;
  std::vector<double> beta(static_cast<std::size_t>(T) * K * D, 0.0);
  std::vector<double> resetnext(K), terms;
  auto b = [&](int t, int k, int c) -> double& {
    return beta[(static_cast<std::size_t>(t) * K + k) * D + c];
  };
  for (int t = T - 2; t >= 0; --t) {
    for (int k = 0; k < K; ++k) {
      terms.clear();
      for (int j = 0; j < K; ++j)
        terms.push_back(in.trans(t + 1, k, j) + in.emission(t + 1, j) + b(t + 1, j, 0));
      resetnext[k] = ad::logsumexp(terms);
    }
    for (int k = 0; k < K; ++k) {
      for (int c = 0; c < D; ++c) {
        const int count = c + 1;
        terms.clear();
        if (c < D - 1) {
          double cont = in.emission(t + 1, k) + b(t + 1, k, c + 1);
          if (count >= in.d_min) cont += in.mu(k, c);
          terms.push_back(cont);
        }
        if (count >= in.d_min) terms.push_back(in.one_minus_mu(k, c) + resetnext[k]);
        b(t, k, c) = ad::logsumexp(terms);
      }
    }
  }
  return beta;
}

}  // namespace hsmm

// ---------------------------------------------------------------------------

void AmoreConfig::validate() const {
  if (num_modes < 1) throw std::invalid_argument("config: num_modes must be >= 1");
  if (!(d_min >= 1 && d_min <= d_max)) throw std::invalid_argument("config: need 1 <= d_min <= d_max");
  if (!(tau_z > 0.0)) throw std::invalid_argument("config: tau_z must be positive");
  if (lambda_l1 < 0.0) throw std::invalid_argument("config: lambda_l1 must be >= 0");
  if (!(sigma_init > 0.0)) throw std::invalid_argument("config: sigma_init must be positive");
  if (degree < 0) throw std::invalid_argument("config: degree must be >= 0");
  if (hidden_width < 1) throw std::invalid_argument("config: hidden_width must be >= 1");
  if (mean_substeps < 1) throw std::invalid_argument("config: mean_substeps must be >= 1");
  if (sigma_floor < 0.0) throw std::invalid_argument("config: sigma_floor must be >= 0");
}

AmoreModel::AmoreModel(const AmoreConfig& config, int state_dim, Rng& init_rng)
    : config_(config), state_dim_(state_dim) {
  config_.validate();
  if (state_dim < 1) throw std::invalid_argument("model: state_dim must be >= 1");
  lib_ = BasisLibrary::build(state_dim, config_.degree, config_.extras);

  const int K = config_.num_modes, M = state_dim, C = lib_.size();
  const int R = config_.d_max - config_.d_min + 1;

  store_.add("pi_logits", {K}, 0.0);
  {
    std::vector<double> im(static_cast<std::size_t>(K) * M);
    for (auto& v : im) v = init_rng.uniform(-1.0, 1.0);
    store_.add("init_mean", {K, M}, im);
  }
  store_.add("init_log_std", {K, M}, 0.0);
  store_.add("hazard", {K, R}, 0.0);
  mode_net_ = ad::make_mlp(store_, "mode_net", M, config_.hidden_width, K * K, 0.1, init_rng);
  {
    std::vector<double> w(static_cast<std::size_t>(K) * C * M);
    for (auto& v : w) v = init_rng.uniform(-0.1, 0.1);
    store_.add("coeffs", {K, C, M}, w);
  }
  store_.add("emission_log_std", {K, M}, std::log(config_.sigma_init));
}

// ---------------------------------------------------------------------------
// plain probability views

double AmoreModel::count_continue_prob(int mode, int count) const {
  if (mode < 0 || mode >= config_.num_modes)
    throw std::invalid_argument("count_continue_prob: mode out of range");
  if (count < 1 || count > config_.d_max)
    throw std::invalid_argument("count_continue_prob: count out of range");
  if (count < config_.d_min) return 1.0;
  if (count == config_.d_max) return 0.0;
  const int R = config_.d_max - config_.d_min + 1;
  auto h = store_.values_of("hazard").subspan(static_cast<std::size_t>(mode) * R, R);
  const auto s = detail::suffix_logsum(h);
  const int r = count - config_.d_min;
  return std::exp(s[r + 1] - s[r]);
}

std::vector<double> AmoreModel::mode_transition_matrix(std::span<const double> y_prev) const {
  const int K = config_.num_modes;
  std::vector<double> logits(static_cast<std::size_t>(K) * K);
  ad::mlp_forward(store_, mode_net_, y_prev, logits);
  std::vector<double> out(logits.size());
  for (int j = 0; j < K; ++j) {
    ad::tempered_softmax(std::span<const double>(logits).subspan(static_cast<std::size_t>(j) * K, K),
                         config_.tau_z,
                         std::span<double>(out).subspan(static_cast<std::size_t>(j) * K, K));
  }
  return out;
}

void AmoreModel::emission_mean(std::span<const double> y_prev, int mode, double dt,
                               std::span<double> out) const {
  const CoefficientTensor w = coefficients();
  detail::emission_mean_plain(lib_, w, config_, y_prev, mode, dt, out);
}

std::vector<double> AmoreModel::emission_std() const {
  auto ls = store_.values_of("emission_log_std");
  std::vector<double> out(ls.begin(), ls.end());
  for (auto& v : out) v = config_.sigma_floor + std::exp(v);
  return out;
}

double AmoreModel::emission_loglik(std::span<const double> y_t, std::span<const double> y_prev,
                                   int mode, double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("emission_loglik: dt must be positive");
  const int M = state_dim_;
  std::vector<double> mean(M);
  emission_mean(y_prev, mode, dt, mean);
  const auto stds = emission_std();
  return ad::gaussian_logpdf(y_t, mean,
                             std::span<const double>(stds).subspan(static_cast<std::size_t>(mode) * M, M));
}

double AmoreModel::initial_emission_loglik(std::span<const double> y1, int mode) const {
  const int M = state_dim_;
  auto mean = store_.values_of("init_mean").subspan(static_cast<std::size_t>(mode) * M, M);
  auto ls = store_.values_of("init_log_std").subspan(static_cast<std::size_t>(mode) * M, M);
  std::vector<double> stds(M);
  for (int m = 0; m < M; ++m) stds[m] = config_.sigma_floor + std::exp(ls[m]);
  return ad::gaussian_logpdf(y1, mean, stds);
}

std::vector<double> AmoreModel::initial_mode_logprobs() const {
  auto logits = store_.values_of("pi_logits");
  std::vector<double> out(logits.begin(), logits.end());
  const double z = ad::logsumexp(out);
  for (auto& v : out) v -= z;
  return out;
}

CoefficientTensor AmoreModel::coefficients() const {
  CoefficientTensor w(config_.num_modes, lib_.size(), state_dim_);
  auto vals = store_.values_of("coeffs");
  std::copy(vals.begin(), vals.end(), w.w.begin());
  return w;
}

// ---------------------------------------------------------------------------
// plain forward-backward

namespace {

hsmm::Inputs<hsmm::PlainEngine> build_plain_inputs(const AmoreModel& model,
                                                   const sim::Trajectory& traj, int object) {
  const auto& cfg = model.config();
  const int T = traj.steps, K = cfg.num_modes, M = model.state_dim();
  if (T < 1) throw std::invalid_argument("forward_backward: empty trajectory");
  if (object < 0 || object >= traj.objects)
    throw std::invalid_argument("forward_backward: object out of range");
  if (traj.state_dim != M) throw std::invalid_argument("forward_backward: state_dim mismatch");

  hsmm::Inputs<hsmm::PlainEngine> in;
  in.steps = T;
  in.num_modes = K;
  in.d_min = cfg.d_min;
  in.d_max = cfg.d_max;
  in.use_counts = cfg.use_count_variables;
  in.log_pi = model.initial_mode_logprobs();
  in.init_ll.resize(K);
  for (int k = 0; k < K; ++k) in.init_ll[k] = model.initial_emission_loglik(traj.state(0, object), k);

  in.em.resize(static_cast<std::size_t>(T - 1) * K);
  in.log_trans.resize(static_cast<std::size_t>(T - 1) * K * K);
  for (int t = 1; t < T; ++t) {
    const auto y_prev = traj.state(t - 1, object);
    const auto y_t = traj.state(t, object);
    for (int k = 0; k < K; ++k)
      in.em[static_cast<std::size_t>(t - 1) * K + k] =
          model.emission_loglik(y_t, y_prev, k, traj.dt);
    const auto trans = model.mode_transition_matrix(y_prev);
    for (int j = 0; j < K; ++j)
      for (int k = 0; k < K; ++k)
        in.log_trans[(static_cast<std::size_t>(t - 1) * K + j) * K + k] =
            std::log(trans[static_cast<std::size_t>(j) * K + k]);
  }

  if (in.use_counts) {
    detail::count_log_tables(model.params(), cfg, in.log_mu, in.log_1m_mu);
  }
  return in;
}

}  // namespace

PosteriorSummary AmoreModel::forward_backward(const sim::Trajectory& traj, int object,
                                              bool want_joint) const {
  return detail::smooth_from_inputs(build_plain_inputs(*this, traj, object), want_joint);
}

namespace detail {

PosteriorSummary smooth_from_inputs(const hsmm::Inputs<hsmm::PlainEngine>& in, bool want_joint) {
  const int T = in.steps, K = in.num_modes;
  hsmm::PlainEngine eng;

  PosteriorSummary summary;
  summary.steps = T;
  summary.modes = K;
  summary.gamma.assign(static_cast<std::size_t>(T) * K, 0.0);
  summary.log_alpha_beta_sum.assign(T, 0.0);

  if (!in.use_counts) {
    std::vector<double> alpha;
    summary.log_likelihood = hsmm::forward(eng, in, &alpha);
    // standard chain smoothing
    std::vector<double> beta(static_cast<std::size_t>(T) * K, 0.0);
    std::vector<double> terms(K);
    for (int t = T - 2; t >= 0; --t) {
      for (int k = 0; k < K; ++k) {
        for (int j = 0; j < K; ++j)
          terms[j] = in.trans(t + 1, k, j) + in.emission(t + 1, j) +
                     beta[static_cast<std::size_t>(t + 1) * K + j];
        beta[static_cast<std::size_t>(t) * K + k] = ad::logsumexp(terms);
      }
    }
    for (int t = 0; t < T; ++t) {
      std::vector<double> ab(K);
      for (int k = 0; k < K; ++k)
        ab[k] = alpha[static_cast<std::size_t>(t) * K + k] + beta[static_cast<std::size_t>(t) * K + k];
      const double z = ad::logsumexp(ab);
      summary.log_alpha_beta_sum[t] = z;
      for (int k = 0; k < K; ++k) summary.gamma[static_cast<std::size_t>(t) * K + k] = std::exp(ab[k] - z);
    }
    summary.decoded_modes = decode_modes(summary);
    return summary;
  }

  const int D = in.d_max;
  std::vector<double> alpha;
  std::vector<char> reach;
  summary.log_likelihood = hsmm::forward(eng, in, &alpha, &reach);
  const std::vector<double> beta = hsmm::backward_plain(in);
  if (want_joint) summary.gamma_joint.assign(static_cast<std::size_t>(T) * K * D, 0.0);

  std::vector<double> ab;
  ab.reserve(static_cast<std::size_t>(K) * D);
  std::vector<double> modeterm;
  for (int t = 0; t < T; ++t) {
    ab.clear();
    std::vector<double> margk(K);
    for (int k = 0; k < K; ++k) {
      modeterm.clear();
      for (int c = 0; c < D; ++c) {
        if (!reach[static_cast<std::size_t>(t) * D + c]) continue;
        const double v = alpha[(static_cast<std::size_t>(t) * K + k) * D + c] +
                         beta[(static_cast<std::size_t>(t) * K + k) * D + c];
        modeterm.push_back(v);
        ab.push_back(v);
      }
      margk[k] = ad::logsumexp(modeterm);
    }
    const double z = ad::logsumexp(ab);
    summary.log_alpha_beta_sum[t] = z;
    for (int k = 0; k < K; ++k)
      summary.gamma[static_cast<std::size_t>(t) * K + k] = std::exp(margk[k] - z);
    if (want_joint) {
      for (int k = 0; k < K; ++k)
        for (int c = 0; c < D; ++c)
          if (reach[static_cast<std::size_t>(t) * D + c])
            summary.gamma_joint[(static_cast<std::size_t>(t) * K + k) * D + c] =
                std::exp(alpha[(static_cast<std::size_t>(t) * K + k) * D + c] +
                         beta[(static_cast<std::size_t>(t) * K + k) * D + c] - z);
    }
  }
  summary.decoded_modes = decode_modes(summary);
  return summary;
}

}  // namespace detail

std::vector<int> decode_modes(const PosteriorSummary& summary) {
  std::vector<int> out(summary.steps);
  for (int t = 0; t < summary.steps; ++t) {
    int best = 0;
    double bestv = summary.gamma_at(t, 0);
    for (int k = 1; k < summary.modes; ++k) {
      if (summary.gamma_at(t, k) > bestv) {
        bestv = summary.gamma_at(t, k);
        best = k;
      }
    }
    out[t] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// differentiable path

Var AmoreModel::nll_per_step(ad::Tape& tape, const sim::Trajectory& traj, int object,
                             std::vector<Var>* filtered) const {
  const int T = traj.steps, K = config_.num_modes, M = state_dim_, C = lib_.size();
  if (T < 1) throw std::invalid_argument("nll_per_step: empty trajectory");
  if (traj.state_dim != M) throw std::invalid_argument("nll_per_step: state_dim mismatch");

  hsmm::TapeEngine eng{&tape};
  hsmm::Inputs<hsmm::TapeEngine> in;
  in.steps = T;
  in.num_modes = K;
  in.d_min = config_.d_min;
  in.d_max = config_.d_max;
  in.use_counts = config_.use_count_variables;

  in.log_pi = detail::log_pi_tape(tape, K);
  in.init_ll = detail::init_ll_tape(tape, config_, M, traj.state(0, object));
  if (in.use_counts) detail::count_log_tables_tape(tape, config_, in.log_mu, in.log_1m_mu);

  const std::vector<Var> stds = detail::emission_std_tape(tape, config_, M);
  const auto w_vars = detail::coeff_param_vars(tape, store_, K, C, M);

  // emissions and transitions per step
  in.em.resize(static_cast<std::size_t>(T - 1) * K);
  in.log_trans.resize(static_cast<std::size_t>(T - 1) * K * K);
  std::vector<double> theta_prev(C);
  std::vector<double> y_prev_buf(M);
  const double inv_tau = 1.0 / config_.tau_z;
  std::vector<Var> row(K);
  for (int t = 1; t < T; ++t) {
    const auto y_prev = traj.state(t - 1, object);
    const auto y_t = traj.state(t, object);
    lib_.evaluate(y_prev, theta_prev);
    for (int k = 0; k < K; ++k) {
      const auto mean = detail::emission_mean_on_tape(tape, lib_, w_vars[k], y_prev,
                                                      theta_prev, traj.dt,
                                                      config_.mean_integrator,
                                                      config_.mean_substeps);
      std::span<const Var> kstd(stds.data() + static_cast<std::size_t>(k) * M,
                                static_cast<std::size_t>(M));
      in.em[static_cast<std::size_t>(t - 1) * K + k] = tape.gaussian_logpdf(y_t, mean, kstd);
    }
    const auto logits = ad::mlp_forward(tape, mode_net_, y_prev);
    for (int j = 0; j < K; ++j) {
      for (int k = 0; k < K; ++k) row[k] = tape.mul_const(logits[static_cast<std::size_t>(j) * K + k], inv_tau);
      const Var z = tape.logsumexp(row);
      for (int k = 0; k < K; ++k)
        in.log_trans[(static_cast<std::size_t>(t - 1) * K + j) * K + k] = tape.sub(row[k], z);
    }
  }

  const Var loglik = hsmm::forward(eng, in, nullptr, nullptr, filtered);
  return tape.mul_const(loglik, -1.0 / T);
}

// ---------------------------------------------------------------------------
// loss

namespace {

double l1_penalty_and_grad(AmoreModel& model, bool with_grad) {
  const auto& e = model.params().entry("coeffs");
  auto vals = model.params().values();
  auto grads = model.params().grads();
  const double lambda = model.config().lambda_l1;
  double penalty = 0.0;
  for (int i = 0; i < e.size; ++i) {
    const double w = vals[e.offset + i];
    penalty += std::abs(w);
    if (with_grad && w != 0.0) grads[e.offset + i] += lambda * (w > 0 ? 1.0 : -1.0);
  }
  return lambda * penalty;
}

}  // namespace

double loss_and_grad(AmoreModel& model, std::span<const sim::Trajectory* const> batch,
                     int threads) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("loss: empty batch");
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, B));

  const int P = model.params().size();
  std::vector<std::vector<double>> gbuf(B);
  std::vector<double> nll(B, 0.0);

  auto worker = [&](int tid) {
    ad::Tape tape(&model.params());
    for (int b = tid; b < B; b += threads) {
      tape.clear();
      const Var per_step = model.nll_per_step(tape, *batch[b]);
      const Var root = tape.mul_const(per_step, 1.0 / B);
      nll[b] = tape.value(per_step);
      gbuf[b].assign(P, 0.0);
      tape.backward(root, gbuf[b]);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int tid = 1; tid < threads; ++tid) pool.emplace_back(worker, tid);
    worker(0);
    for (auto& th : pool) th.join();
  }

  double mean_nll = 0.0;
  for (int b = 0; b < B; ++b) {
    if (!std::isfinite(nll[b]))
      throw TrainingDiverged("non-finite likelihood in batch element " + std::to_string(b), b);
    mean_nll += nll[b] / B;
  }
  auto grads = model.params().grads();
  for (int b = 0; b < B; ++b) {
    const auto& gb = gbuf[b];
    for (int i = 0; i < P; ++i) grads[i] += gb[i];
  }
  return mean_nll + l1_penalty_and_grad(model, true);
}

double loss_value(const AmoreModel& model, std::span<const sim::Trajectory* const> batch) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("loss: empty batch");
  double mean_nll = 0.0;
  for (int b = 0; b < B; ++b) {
    const auto summary = model.forward_backward(*batch[b]);
    mean_nll += -summary.log_likelihood / batch[b]->steps / B;
  }
  double penalty = 0.0;
  for (double w : model.params().values_of("coeffs")) penalty += std::abs(w);
  return mean_nll + model.config().lambda_l1 * penalty;
}

// ---------------------------------------------------------------------------
// forecasting

Forecast AmoreModel::forecast(const sim::Trajectory& traj, int object, int context_len,
                              int horizon, ForecastMode fmode) const {
  if (horizon < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
  if (context_len < 1) throw std::invalid_argument("forecast: context length must be >= 1");
  if (context_len > traj.steps)
    throw std::invalid_argument("forecast: context longer than trajectory");
  if (fmode == ForecastMode::OneStep && context_len + horizon > traj.steps)
    throw std::invalid_argument("forecast: one-step mode needs ground truth over the horizon");

  const int K = config_.num_modes, M = state_dim_;
  const int D = config_.use_count_variables ? config_.d_max : 1;

  // filtered state as probabilities over (mode, count)
  std::vector<double> p(static_cast<std::size_t>(K) * D, 0.0), pred(p.size());
  std::vector<double> mu(static_cast<std::size_t>(K) * D, 1.0);
  if (config_.use_count_variables) {
    for (int k = 0; k < K; ++k)
      for (int c = 1; c <= config_.d_max; ++c)
        mu[static_cast<std::size_t>(k) * D + (c - 1)] = count_continue_prob(k, c);
  }

  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s > 0.0)
      for (double& x : v) x /= s;
  };

  // init with the first observation
  {
    const auto logpi = initial_mode_logprobs();
    std::vector<double> ll(K);
    for (int k = 0; k < K; ++k) ll[k] = logpi[k] + initial_emission_loglik(traj.state(0, object), k);
    const double mx = *std::max_element(ll.begin(), ll.end());
    for (int k = 0; k < K; ++k) p[static_cast<std::size_t>(k) * D + 0] = std::exp(ll[k] - mx);
    normalize(p);
  }

  std::vector<double> y_prev(traj.state(0, object).begin(), traj.state(0, object).end());
  std::vector<double> mean(M), reset_mass(K), mode_marg(K), emll(K);

  auto push_predict = [&](std::span<const double> y_at) {
    const auto trans = mode_transition_matrix(y_at);
    std::fill(pred.begin(), pred.end(), 0.0);
    if (!config_.use_count_variables) {
      for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += p[j] * trans[static_cast<std::size_t>(j) * K + k];
        pred[k] = s;
      }
      return;
    }
    for (int j = 0; j < K; ++j) {
      double s = 0.0;
      for (int c = config_.d_min - 1; c < D; ++c)
        s += (1.0 - mu[static_cast<std::size_t>(j) * D + c]) * p[static_cast<std::size_t>(j) * D + c];
      reset_mass[j] = s;
    }
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int j = 0; j < K; ++j) s += reset_mass[j] * trans[static_cast<std::size_t>(j) * K + k];
      pred[static_cast<std::size_t>(k) * D + 0] = s;
      for (int c = 1; c < D; ++c)
        pred[static_cast<std::size_t>(k) * D + c] =
            mu[static_cast<std::size_t>(k) * D + (c - 1)] * p[static_cast<std::size_t>(k) * D + (c - 1)];
    }
  };

  auto condition = [&](std::span<const double> y_t, std::span<const double> y_from) {
    for (int k = 0; k < K; ++k) emll[k] = emission_loglik(y_t, y_from, k, traj.dt);
    const double mx = *std::max_element(emll.begin(), emll.end());
    for (int k = 0; k < K; ++k) {
      const double wgt = std::exp(emll[k] - mx);
      for (int c = 0; c < D; ++c) pred[static_cast<std::size_t>(k) * D + c] *= wgt;
    }
  };

  // run the filter over the context
  for (int t = 1; t < context_len; ++t) {
    const auto y_at = traj.state(t - 1, object);
    push_predict(y_at);
    condition(traj.state(t, object), y_at);
    p = pred;
    normalize(p);
  }
  y_prev.assign(traj.state(context_len - 1, object).begin(), traj.state(context_len - 1, object).end());

  Forecast out;
  out.horizon = horizon;
  out.state_dim = M;
  out.predictions.resize(static_cast<std::size_t>(horizon) * M);
  out.predicted_modes.resize(horizon);

  for (int hstep = 0; hstep < horizon; ++hstep) {
    push_predict(y_prev);
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int c = 0; c < D; ++c) s += pred[static_cast<std::size_t>(k) * D + c];
      mode_marg[k] = s;
    }
    int khat = 0;
    for (int k = 1; k < K; ++k)
      if (mode_marg[k] > mode_marg[khat]) khat = k;

    emission_mean(y_prev, khat, traj.dt, mean);
    std::copy(mean.begin(), mean.end(),
              out.predictions.begin() + static_cast<std::size_t>(hstep) * M);
    out.predicted_modes[hstep] = khat;

    if (fmode == ForecastMode::OneStep) {
      const int t = context_len + hstep;
      condition(traj.state(t, object), y_prev);
      p = pred;
      normalize(p);
      y_prev.assign(traj.state(t, object).begin(), traj.state(t, object).end());
    } else {
      p = pred;
      normalize(p);
      y_prev = mean;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpointing

namespace detail {

std::string amore_meta_json(const AmoreConfig& cfg, int state_dim) {
  nlohmann::json j;
  j["model"] = "amore";
  j["state_dim"] = state_dim;
  nlohmann::json c;
  c["num_modes"] = cfg.num_modes;
  c["d_min"] = cfg.d_min;
  c["d_max"] = cfg.d_max;
  c["tau_z"] = cfg.tau_z;
  c["lambda_l1"] = cfg.lambda_l1;
  c["sigma_init"] = cfg.sigma_init;
  c["degree"] = cfg.degree;
  c["use_count_variables"] = cfg.use_count_variables;
  c["hidden_width"] = cfg.hidden_width;
  c["mean_integrator"] = cfg.mean_integrator == MeanIntegrator::Euler ? "euler" : "rk4";
  c["mean_substeps"] = cfg.mean_substeps;
  c["sigma_floor"] = cfg.sigma_floor;
  c["extras"] = nlohmann::json::array();
  for (const auto& ex : cfg.extras) {
    const char* kind = ex.kind == Elementary::Cos ? "cos" : ex.kind == Elementary::Sin ? "sin" : "exp";
    c["extras"].push_back({{"kind", kind}, {"dim", ex.dim}});
  }
  j["config"] = std::move(c);
  return j.dump();
}

}  // namespace detail

std::string AmoreModel::config_meta_json() const {
  return detail::amore_meta_json(config_, state_dim_);
}

AmoreConfig AmoreModel::config_from_meta(const std::string& meta_json, int* state_dim) {
  const auto j = nlohmann::json::parse(meta_json);
  if (state_dim) *state_dim = j.at("state_dim").get<int>();
  const auto& c = j.at("config");
  AmoreConfig cfg;
  cfg.num_modes = c.at("num_modes").get<int>();
  cfg.d_min = c.at("d_min").get<int>();
  cfg.d_max = c.at("d_max").get<int>();
  cfg.tau_z = c.at("tau_z").get<double>();
  cfg.lambda_l1 = c.at("lambda_l1").get<double>();
  cfg.sigma_init = c.at("sigma_init").get<double>();
  cfg.degree = c.at("degree").get<int>();
  cfg.use_count_variables = c.at("use_count_variables").get<bool>();
  cfg.hidden_width = c.at("hidden_width").get<int>();
  cfg.mean_integrator = c.at("mean_integrator").get<std::string>() == "rk4"
                            ? MeanIntegrator::Rk4
                            : MeanIntegrator::Euler;
  cfg.mean_substeps = c.at("mean_substeps").get<int>();
  cfg.sigma_floor = c.at("sigma_floor").get<double>();
  for (const auto& ex : c.at("extras")) {
    const std::string kind = ex.at("kind").get<std::string>();
    ElementarySpec spec;
    spec.kind = kind == "cos" ? Elementary::Cos : kind == "sin" ? Elementary::Sin : Elementary::Exp;
    spec.dim = ex.at("dim").get<int>();
    cfg.extras.push_back(spec);
  }
  return cfg;
}

void AmoreModel::save_checkpoint(const std::string& path) const {
  store_.save_json(path, config_meta_json());
}

void AmoreModel::load_checkpoint(const std::string& path) { store_.load_json(path); }

AmoreModel AmoreModel::from_checkpoint(const std::string& path) {
  // peek at the meta to reconstruct the layout, then load values
  ad::ParamStore probe;
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    in >> j;
  }
  if (!j.contains("meta")) throw std::runtime_error("checkpoint missing model meta: " + path);
  int state_dim = 0;
  const AmoreConfig cfg = config_from_meta(j["meta"].dump(), &state_dim);
  Rng rng(0);
  AmoreModel model(cfg, state_dim, rng);
  model.load_checkpoint(path);
  return model;
}

}  // namespace amore
