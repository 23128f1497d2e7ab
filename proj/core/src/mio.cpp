#include "amore/mio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "amore/errors.hpp"
#include "amore/hsmm.hpp"
#include "amore/metrics.hpp"
#include "model_detail.hpp"

namespace amore {

using ad::Var;

void MioConfig::validate() const {
  base.validate();
  if (num_objects < 1) throw std::invalid_argument("mio: num_objects must be >= 1");
  if (edge_types < 2) throw std::invalid_argument("mio: edge_types must be >= 2");
  if (!(tau_e > 0.0)) throw std::invalid_argument("mio: tau_e must be positive");
  if (!(gumbel_tau > 0.0)) throw std::invalid_argument("mio: gumbel_tau must be positive");
  if (static_cast<int>(edge_prior.size()) != edge_types)
    throw std::invalid_argument("mio: edge_prior length must equal edge_types");
  double s = 0.0;
  for (double p : edge_prior) {
    if (!(p > 0.0)) throw std::invalid_argument("mio: edge_prior entries must be positive");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("mio: edge_prior must sum to 1");
  for (double p : edge_prior)
    if (p > edge_prior[0] + 1e-12)
      throw std::invalid_argument("mio: no-interaction prior must be the largest entry");
}

MioModel::MioModel(const MioConfig& config, int state_dim, Rng& init_rng)
    : config_(config), state_dim_(state_dim) {
  config_.validate();
  lib_ = BasisLibrary::build(state_dim, config_.base.degree, config_.base.extras);

  const int K = config_.base.num_modes, M = state_dim, C = lib_.size();
  const int L = config_.edge_types, H = config_.base.hidden_width;
  const int R = config_.base.d_max - config_.base.d_min + 1;

  store_.add("pi_logits", {K}, 0.0);
  {
    std::vector<double> im(static_cast<std::size_t>(K) * M);
    for (auto& v : im) v = init_rng.uniform(-1.0, 1.0);
    store_.add("init_mean", {K, M}, im);
  }
  store_.add("init_log_std", {K, M}, 0.0);
  store_.add("hazard", {K, R}, 0.0);
  {
    std::vector<double> w(static_cast<std::size_t>(K) * C * M);
    for (auto& v : w) v = init_rng.uniform(-0.1, 0.1);
    store_.add("coeffs", {K, C, M}, w);
  }
  store_.add("emission_log_std", {K, M}, std::log(config_.base.sigma_init));

  for (int l = 0; l < L; ++l)
    interact_.push_back(
        ad::make_mlp(store_, "interact_" + std::to_string(l), 2 * M, H, K * K, 0.1, init_rng));
  edge_net_ = ad::make_mlp(store_, "edge_net", L + 2 * M + 2 * K, H, L, 0.1, init_rng);
  enc_emb_ = ad::make_mlp(store_, "enc_emb", M, H, H, 0.1, init_rng);
  enc_e1_ = ad::make_mlp(store_, "enc_e1", 2 * H, H, H, 0.1, init_rng);
  enc_v1_ = ad::make_mlp(store_, "enc_v1", H, H, H, 0.1, init_rng);
  enc_e2_ = ad::make_mlp(store_, "enc_e2", 2 * H, H, L, 0.1, init_rng);
}

double MioModel::count_continue_prob(int mode, int count) const {
  const auto& cfg = config_.base;
  if (mode < 0 || mode >= cfg.num_modes)
    throw std::invalid_argument("count_continue_prob: mode out of range");
  if (count < 1 || count > cfg.d_max)
    throw std::invalid_argument("count_continue_prob: count out of range");
  if (count < cfg.d_min) return 1.0;
  if (count == cfg.d_max) return 0.0;
  const int R = cfg.d_max - cfg.d_min + 1;
  auto h = store_.values_of("hazard").subspan(static_cast<std::size_t>(mode) * R, R);
  const auto s = detail::suffix_logsum(h);
  const int r = count - cfg.d_min;
  return std::exp(s[r + 1] - s[r]);
}

void MioModel::emission_mean(std::span<const double> y_prev, int mode, double dt,
                             std::span<double> out) const {
  detail::emission_mean_plain(lib_, coefficients(), config_.base, y_prev, mode, dt, out);
}

CoefficientTensor MioModel::coefficients() const {
  CoefficientTensor w(config_.base.num_modes, lib_.size(), state_dim_);
  auto vals = store_.values_of("coeffs");
  std::copy(vals.begin(), vals.end(), w.w.begin());
  return w;
}

// ---------------------------------------------------------------------------
// encoder

std::vector<double> MioModel::edge_posterior_logits(const sim::Trajectory& traj) const {
  const int N = traj.objects, M = state_dim_, L = config_.edge_types;
  const int H = config_.base.hidden_width;
  if (N < 2) throw std::invalid_argument("edge_posterior: needs at least two objects");
  if (traj.state_dim != M) throw std::invalid_argument("edge_posterior: state_dim mismatch");

  std::vector<double> logits(static_cast<std::size_t>(traj.steps) * N * N * L);
  std::vector<std::vector<double>> h1(N, std::vector<double>(H)), h2(N, std::vector<double>(H));
  std::vector<std::vector<double>> msg(static_cast<std::size_t>(N) * N, std::vector<double>(H));
  std::vector<double> cat(2 * H), agg(H), out(L);
  for (int t = 0; t < traj.steps; ++t) {
    for (int n = 0; n < N; ++n) ad::mlp_forward(store_, enc_emb_, traj.state(t, n), h1[n]);
    for (int m = 0; m < N; ++m) {
      for (int n = 0; n < N; ++n) {
        std::copy(h1[m].begin(), h1[m].end(), cat.begin());
        std::copy(h1[n].begin(), h1[n].end(), cat.begin() + H);
        ad::mlp_forward(store_, enc_e1_, cat, msg[static_cast<std::size_t>(m) * N + n]);
      }
    }
    for (int n = 0; n < N; ++n) {
      std::fill(agg.begin(), agg.end(), 0.0);
      for (int m = 0; m < N; ++m)
        for (int i = 0; i < H; ++i) agg[i] += msg[static_cast<std::size_t>(m) * N + n][i];
      ad::mlp_forward(store_, enc_v1_, agg, h2[n]);
    }
    for (int m = 0; m < N; ++m) {
      for (int n = 0; n < N; ++n) {
        std::copy(h2[m].begin(), h2[m].end(), cat.begin());
        std::copy(h2[n].begin(), h2[n].end(), cat.begin() + H);
        ad::mlp_forward(store_, enc_e2_, cat, out);
        std::copy(out.begin(), out.end(),
                  logits.begin() + ((static_cast<std::size_t>(t) * N * N) +
                                    static_cast<std::size_t>(m) * N + n) * L);
      }
    }
  }
  return logits;
}

EdgeSample gumbel_sample(std::span<const double> logits, int steps, int pairs, int types,
                         double gumbel_tau, Rng& rng) {
  if (!(gumbel_tau > 0.0)) throw std::invalid_argument("gumbel_sample: tau must be positive");
  if (logits.size() != static_cast<std::size_t>(steps) * pairs * types)
    throw std::invalid_argument("gumbel_sample: shape mismatch");
  EdgeSample s;
  s.steps = steps;
  s.pairs = pairs;
  s.types = types;
  s.relaxed.resize(logits.size());
  s.hard.resize(static_cast<std::size_t>(steps) * pairs);
  std::vector<double> noisy(types);
  for (int t = 0; t < steps; ++t) {
    for (int p = 0; p < pairs; ++p) {
      const std::size_t off = (static_cast<std::size_t>(t) * pairs + p) * types;
      for (int l = 0; l < types; ++l) noisy[l] = logits[off + l] + rng.gumbel();
      ad::tempered_softmax(noisy, gumbel_tau,
                           std::span<double>(s.relaxed).subspan(off, types));
      int best = 0;
      for (int l = 1; l < types; ++l)
        if (noisy[l] > noisy[best]) best = l;
      s.hard[static_cast<std::size_t>(t) * pairs + p] = best;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// transitions

std::vector<double> MioModel::interaction_mode_transition(std::span<const double> y_prev_all,
                                                          std::span<const double> edges_at_t,
                                                          int object) const {
  const int N = config_.num_objects, M = state_dim_, K = config_.base.num_modes;
  const int L = config_.edge_types;
  if (static_cast<int>(y_prev_all.size()) != N * M)
    throw std::invalid_argument("interaction_mode_transition: state shape mismatch");
  if (static_cast<int>(edges_at_t.size()) != N * N * L)
    throw std::invalid_argument("interaction_mode_transition: edge shape mismatch");

  std::vector<double> logits(static_cast<std::size_t>(K) * K, 0.0);
  std::vector<double> cat(2 * M), out(static_cast<std::size_t>(K) * K);

  // no-interaction contribution sees only the object's own state
  std::copy(y_prev_all.begin() + object * M, y_prev_all.begin() + (object + 1) * M, cat.begin());
  std::copy(y_prev_all.begin() + object * M, y_prev_all.begin() + (object + 1) * M,
            cat.begin() + M);
  ad::mlp_forward(store_, interact_[0], cat, out);
  double e0_sum = 0.0;
  for (int m = 0; m < N; ++m)
    e0_sum += edges_at_t[(static_cast<std::size_t>(m) * N + object) * L + 0];
  for (std::size_t i = 0; i < out.size(); ++i) logits[i] += e0_sum * out[i];

  for (int m = 0; m < N; ++m) {
    std::copy(y_prev_all.begin() + m * M, y_prev_all.begin() + (m + 1) * M, cat.begin());
    std::copy(y_prev_all.begin() + object * M, y_prev_all.begin() + (object + 1) * M,
              cat.begin() + M);
    for (int l = 1; l < L; ++l) {
      const double e = edges_at_t[(static_cast<std::size_t>(m) * N + object) * L + l];
      if (e == 0.0) continue;
      ad::mlp_forward(store_, interact_[l], cat, out);
      for (std::size_t i = 0; i < out.size(); ++i) logits[i] += e * out[i];
    }
  }

  std::vector<double> trans(logits.size());
  for (int j = 0; j < K; ++j)
    ad::tempered_softmax(std::span<const double>(logits).subspan(static_cast<std::size_t>(j) * K, K),
                         config_.base.tau_z,
                         std::span<double>(trans).subspan(static_cast<std::size_t>(j) * K, K));
  return trans;
}

// ---------------------------------------------------------------------------
// per-object exact inference given edges

namespace {

hsmm::Inputs<hsmm::PlainEngine> build_object_inputs(const MioModel& model,
                                                    const sim::Trajectory& traj,
                                                    const EdgeSample& edges, int object) {
  const auto& cfg = model.config().base;
  const int T = traj.steps, K = cfg.num_modes, M = model.state_dim();
  const int N = traj.objects;

  hsmm::Inputs<hsmm::PlainEngine> in;
  in.steps = T;
  in.num_modes = K;
  in.d_min = cfg.d_min;
  in.d_max = cfg.d_max;
  in.use_counts = cfg.use_count_variables;

  {
    auto logits = model.params().values_of("pi_logits");
    std::vector<double> lp(logits.begin(), logits.end());
    const double z = ad::logsumexp(lp);
    for (auto& v : lp) v -= z;
    in.log_pi = std::move(lp);
  }
  {
    in.init_ll.resize(K);
    auto im = model.params().values_of("init_mean");
    auto ils = model.params().values_of("init_log_std");
    std::vector<double> stds(M);
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < M; ++m) stds[m] = cfg.sigma_floor + std::exp(ils[k * M + m]);
      in.init_ll[k] = ad::gaussian_logpdf(traj.state(0, object),
                                          im.subspan(static_cast<std::size_t>(k) * M, M), stds);
    }
  }
  if (in.use_counts) detail::count_log_tables(model.params(), cfg, in.log_mu, in.log_1m_mu);

  const CoefficientTensor w = model.coefficients();
  auto els = model.params().values_of("emission_log_std");
  std::vector<double> stds(static_cast<std::size_t>(K) * M);
  for (std::size_t i = 0; i < stds.size(); ++i) stds[i] = cfg.sigma_floor + std::exp(els[i]);

  in.em.resize(static_cast<std::size_t>(T - 1) * K);
  in.log_trans.resize(static_cast<std::size_t>(T - 1) * K * K);
  std::vector<double> mean(M), y_all(static_cast<std::size_t>(N) * M);
  for (int t = 1; t < T; ++t) {
    const auto y_prev = traj.state(t - 1, object);
    const auto y_t = traj.state(t, object);
    for (int k = 0; k < K; ++k) {
      detail::emission_mean_plain(model.library(), w, cfg, y_prev, k, traj.dt, mean);
      in.em[static_cast<std::size_t>(t - 1) * K + k] = ad::gaussian_logpdf(
          y_t, mean, std::span<const double>(stds).subspan(static_cast<std::size_t>(k) * M, M));
    }
    for (int n = 0; n < N; ++n) {
      const auto s = traj.state(t - 1, n);
      std::copy(s.begin(), s.end(), y_all.begin() + static_cast<std::size_t>(n) * M);
    }
    const auto edges_at_t = std::span<const double>(edges.relaxed)
                                .subspan(static_cast<std::size_t>(t) * edges.pairs * edges.types,
                                         static_cast<std::size_t>(edges.pairs) * edges.types);
    const auto trans = model.interaction_mode_transition(y_all, edges_at_t, object);
    for (std::size_t i = 0; i < trans.size(); ++i)
      in.log_trans[static_cast<std::size_t>(t - 1) * K * K + i] = std::log(trans[i]);
  }
  return in;
}

}  // namespace

std::vector<PosteriorSummary> MioModel::infer(const sim::Trajectory& traj,
                                              const EdgeSample& edges) const {
  if (edges.steps != traj.steps || edges.pairs != traj.objects * traj.objects ||
      edges.types != config_.edge_types)
    throw std::invalid_argument("infer: edge sample does not cover the trajectory");
  std::vector<PosteriorSummary> out;
  for (int n = 0; n < traj.objects; ++n)
    out.push_back(detail::smooth_from_inputs(build_object_inputs(*this, traj, edges, n), false));
  return out;
}

MioEval MioModel::evaluate(const sim::Trajectory& traj) const {
  const int N = traj.objects, L = config_.edge_types;
  MioEval eval;
  const auto logits = edge_posterior_logits(traj);
  eval.edge_probs.resize(logits.size());
  eval.edges.steps = traj.steps;
  eval.edges.pairs = N * N;
  eval.edges.types = L;
  eval.edges.relaxed.assign(logits.size(), 0.0);
  eval.edges.hard.resize(static_cast<std::size_t>(traj.steps) * N * N);
  for (std::size_t row = 0; row < logits.size() / L; ++row) {
    const auto lrow = std::span<const double>(logits).subspan(row * L, L);
    ad::tempered_softmax(lrow, 1.0, std::span<double>(eval.edge_probs).subspan(row * L, L));
    int best = 0;
    for (int l = 1; l < L; ++l)
      if (lrow[l] > lrow[best]) best = l;
    eval.edges.hard[row] = best;
    eval.edges.relaxed[row * L + best] = 1.0;
  }
  eval.per_object = infer(traj, eval.edges);
  return eval;
}

// ---------------------------------------------------------------------------
// ELBO on the tape

Var MioModel::neg_elbo_per_step(ad::Tape& tape, const sim::Trajectory& traj,
                                std::span<const double> gumbel_noise) const {
  const auto& cfg = config_.base;
  const int T = traj.steps, K = cfg.num_modes, M = state_dim_, C = lib_.size();
  const int N = traj.objects, L = config_.edge_types, H = cfg.hidden_width;
  const int P = N * N;
  if (N != config_.num_objects)
    throw std::invalid_argument("neg_elbo: trajectory object count mismatch");
  if (gumbel_noise.size() != static_cast<std::size_t>(T) * P * L)
    throw std::invalid_argument("neg_elbo: gumbel noise shape mismatch");

  // --- encoder logits and relaxed edge samples for every step/pair
  std::vector<Var> enc_logits(static_cast<std::size_t>(T) * P * L);
  std::vector<Var> edges(static_cast<std::size_t>(T) * P * L);
  std::vector<Var> entropy_terms;  // q log q products, summed with weight -1
  entropy_terms.reserve(enc_logits.size());
  {
    std::vector<std::vector<Var>> h1(N), h2(N);
    std::vector<std::vector<Var>> msg(P);
    std::vector<Var> cat(2 * H), row(L);
    for (int t = 0; t < T; ++t) {
      for (int n = 0; n < N; ++n) h1[n] = ad::mlp_forward(tape, enc_emb_, traj.state(t, n));
      for (int m = 0; m < N; ++m)
        for (int n = 0; n < N; ++n) {
          std::copy(h1[m].begin(), h1[m].end(), cat.begin());
          std::copy(h1[n].begin(), h1[n].end(), cat.begin() + H);
          msg[static_cast<std::size_t>(m) * N + n] = ad::mlp_forward(tape, enc_e1_, cat);
        }
      for (int n = 0; n < N; ++n) {
        std::vector<Var> agg = msg[n];  // m = 0
        for (int m = 1; m < N; ++m)
          for (int i = 0; i < H; ++i)
            agg[i] = tape.add(agg[i], msg[static_cast<std::size_t>(m) * N + n][i]);
        h2[n] = ad::mlp_forward(tape, enc_v1_, agg);
      }
      for (int m = 0; m < N; ++m)
        for (int n = 0; n < N; ++n) {
          std::copy(h2[m].begin(), h2[m].end(), cat.begin());
          std::copy(h2[n].begin(), h2[n].end(), cat.begin() + H);
          const auto out = ad::mlp_forward(tape, enc_e2_, cat);
          const std::size_t off =
              (static_cast<std::size_t>(t) * P + static_cast<std::size_t>(m) * N + n) * L;
          for (int l = 0; l < L; ++l) enc_logits[off + l] = out[l];

          // entropy of q = softmax(logits)
          const Var z = tape.logsumexp(out);
          for (int l = 0; l < L; ++l) {
            const Var logq = tape.sub(out[l], z);
            entropy_terms.push_back(tape.mul(tape.exp(logq), logq));
          }
          // relaxed sample
          for (int l = 0; l < L; ++l)
            row[l] = tape.mul_const(tape.add_const(out[l], gumbel_noise[off + l]),
                                    1.0 / config_.gumbel_tau);
          const Var zs = tape.logsumexp(row);
          for (int l = 0; l < L; ++l) edges[off + l] = tape.exp(tape.sub(row[l], zs));
        }
    }
  }

  // --- shared chain pieces
  const std::vector<Var> log_pi = detail::log_pi_tape(tape, K);
  std::vector<Var> log_mu, log_1m;
  if (cfg.use_count_variables) detail::count_log_tables_tape(tape, cfg, log_mu, log_1m);
  const std::vector<Var> stds = detail::emission_std_tape(tape, cfg, M);
  const auto w_vars = detail::coeff_param_vars(tape, store_, K, C, M);

  // --- per-object forward passes (transitions mix interaction nets by edges)
  std::vector<Var> loglik(N);
  std::vector<std::vector<Var>> filtered(N);  // [T x K] log marginals per object
  {
    std::vector<double> theta_prev(C);
    std::vector<double> cat2(2 * M);
    std::vector<Var> fl_out;   // interaction net outputs per (m, l)
    std::vector<Var> mixe, mixl;
    for (int n = 0; n < N; ++n) {
      hsmm::Inputs<hsmm::TapeEngine> in;
      in.steps = T;
      in.num_modes = K;
      in.d_min = cfg.d_min;
      in.d_max = cfg.d_max;
      in.use_counts = cfg.use_count_variables;
      in.log_pi = log_pi;
      in.init_ll = detail::init_ll_tape(tape, cfg, M, traj.state(0, n));
      in.log_mu = log_mu;
      in.log_1m_mu = log_1m;
      in.em.resize(static_cast<std::size_t>(T - 1) * K);
      in.log_trans.resize(static_cast<std::size_t>(T - 1) * K * K);

      for (int t = 1; t < T; ++t) {
        const auto y_prev = traj.state(t - 1, n);
        const auto y_t = traj.state(t, n);
        lib_.evaluate(y_prev, theta_prev);
        for (int k = 0; k < K; ++k) {
          const auto mean = detail::emission_mean_on_tape(
              tape, lib_, w_vars[k], y_prev, theta_prev, traj.dt, cfg.mean_integrator,
              cfg.mean_substeps);
          std::span<const Var> kstd(stds.data() + static_cast<std::size_t>(k) * M,
                                    static_cast<std::size_t>(M));
          in.em[static_cast<std::size_t>(t - 1) * K + k] = tape.gaussian_logpdf(y_t, mean, kstd);
        }

        // logits[e] = sum over sources m and types l of edge weight * f_l output
        std::vector<std::vector<Var>> contrib;  // one K*K vector per (m, l) term
        std::vector<Var> weights;
        {
          // type-0 net sees the object's own state only; one evaluation, with
          // the summed type-0 edge weight across sources
          std::copy(y_prev.begin(), y_prev.end(), cat2.begin());
          std::copy(y_prev.begin(), y_prev.end(), cat2.begin() + M);
          contrib.push_back(ad::mlp_forward(tape, interact_[0], cat2));
          Var e0 = edges[(static_cast<std::size_t>(t) * P + 0 * N + n) * L + 0];
          for (int m = 1; m < N; ++m)
            e0 = tape.add(e0, edges[(static_cast<std::size_t>(t) * P +
                                     static_cast<std::size_t>(m) * N + n) * L + 0]);
          weights.push_back(e0);
          for (int m = 0; m < N; ++m) {
            const auto y_m = traj.state(t - 1, m);
            std::copy(y_m.begin(), y_m.end(), cat2.begin());
            std::copy(y_prev.begin(), y_prev.end(), cat2.begin() + M);
            for (int l = 1; l < L; ++l) {
              contrib.push_back(ad::mlp_forward(tape, interact_[l], cat2));
              weights.push_back(edges[(static_cast<std::size_t>(t) * P +
                                       static_cast<std::size_t>(m) * N + n) * L + l]);
            }
          }
        }
        const int terms = static_cast<int>(weights.size());
        mixe.resize(terms);
        mixl.resize(terms);
        std::vector<Var> mixed(static_cast<std::size_t>(K) * K);
        for (int e = 0; e < K * K; ++e) {
          for (int i = 0; i < terms; ++i) {
            mixe[i] = weights[i];
            mixl[i] = contrib[i][e];
          }
          mixed[e] = tape.dot(mixe, mixl);
        }
        std::vector<Var> row(K);
        for (int j = 0; j < K; ++j) {
          for (int k = 0; k < K; ++k)
            row[k] = tape.mul_const(mixed[static_cast<std::size_t>(j) * K + k], 1.0 / cfg.tau_z);
          const Var z = tape.logsumexp(row);
          for (int k = 0; k < K; ++k)
            in.log_trans[(static_cast<std::size_t>(t - 1) * K + j) * K + k] = tape.sub(row[k], z);
        }
      }

      hsmm::TapeEngine eng{&tape};
      loglik[n] = hsmm::forward(eng, in, nullptr, nullptr, &filtered[n]);
    }
  }

  // --- edge chain score: prior at t=0, transition net afterwards
  std::vector<Var> chain_scores;
  {
    std::vector<double> logprior(L);
    for (int l = 0; l < L; ++l) logprior[l] = std::log(config_.edge_prior[l]);
    for (int p = 0; p < P; ++p) {
      const std::size_t off = static_cast<std::size_t>(p) * L;
      chain_scores.push_back(
          tape.lincomb(0.0, logprior, std::span<const Var>(edges.data() + off, L)));
    }
    // probability-space filtered marginals per (t, n)
    std::vector<std::vector<Var>> gamma_prob(static_cast<std::size_t>(T) * N);
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t) {
        auto& g = gamma_prob[static_cast<std::size_t>(t) * N + n];
        g.resize(K);
        for (int k = 0; k < K; ++k)
          g[k] = tape.exp(filtered[n][static_cast<std::size_t>(t) * K + k]);
      }
    std::vector<Var> x(L + 2 * M + 2 * K), srow(L);
    for (int t = 1; t < T; ++t) {
      std::vector<std::vector<Var>> yconst(N);
      for (int n = 0; n < N; ++n) {
        const auto y = traj.state(t - 1, n);
        yconst[n].resize(M);
        for (int m = 0; m < M; ++m) yconst[n][m] = tape.constant(y[m]);
      }
      for (int m = 0; m < N; ++m)
        for (int n = 0; n < N; ++n) {
          const std::size_t prev_off =
              (static_cast<std::size_t>(t - 1) * P + static_cast<std::size_t>(m) * N + n) * L;
          const std::size_t cur_off =
              (static_cast<std::size_t>(t) * P + static_cast<std::size_t>(m) * N + n) * L;
          int xi = 0;
          for (int l = 0; l < L; ++l) x[xi++] = edges[prev_off + l];
          for (int mm = 0; mm < M; ++mm) x[xi++] = yconst[m][mm];
          for (int mm = 0; mm < M; ++mm) x[xi++] = yconst[n][mm];
          for (int k = 0; k < K; ++k) x[xi++] = gamma_prob[static_cast<std::size_t>(t - 1) * N + m][k];
          for (int k = 0; k < K; ++k) x[xi++] = gamma_prob[static_cast<std::size_t>(t - 1) * N + n][k];
          const auto out = ad::mlp_forward(tape, edge_net_, x);
          for (int l = 0; l < L; ++l) srow[l] = tape.mul_const(out[l], 1.0 / config_.tau_e);
          const Var z = tape.logsumexp(srow);
          std::vector<Var> logp(L);
          for (int l = 0; l < L; ++l) logp[l] = tape.sub(srow[l], z);
          chain_scores.push_back(
              tape.dot(std::span<const Var>(edges.data() + cur_off, L), logp));
        }
    }
  }

  // --- assemble: -(sum loglik + chain + entropy)/T
  std::vector<Var> pieces;
  pieces.reserve(N + chain_scores.size() + 1);
  for (int n = 0; n < N; ++n) pieces.push_back(loglik[n]);
  for (const Var v : chain_scores) pieces.push_back(v);
  {
    std::vector<double> ones(entropy_terms.size(), -1.0);  // H = -sum q log q
    pieces.push_back(tape.lincomb(0.0, ones, entropy_terms));
  }
  std::vector<double> ones(pieces.size(), 1.0);
  const Var total = tape.lincomb(0.0, ones, pieces);
  return tape.mul_const(total, -1.0 / T);
}

// ---------------------------------------------------------------------------
// loss and training

namespace {

std::vector<double> draw_noise(const sim::Trajectory& traj, int L, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(traj.steps) * traj.objects * traj.objects * L;
  std::vector<double> noise(n);
  Rng rng(seed);
  for (auto& v : noise) v = rng.gumbel();
  return noise;
}

}  // namespace

double mio_loss_and_grad(MioModel& model, std::span<const sim::Trajectory* const> batch,
                         std::uint64_t noise_seed, int threads) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("mio loss: empty batch");
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, B));

  const int P = model.params().size();
  std::vector<std::vector<double>> gbuf(B);
  std::vector<double> nelbo(B, 0.0);
  Rng seed_rng(noise_seed);
  std::vector<std::uint64_t> traj_seed(B);
  for (int b = 0; b < B; ++b) traj_seed[b] = seed_rng.next_u64();

  auto worker = [&](int tid) {
    ad::Tape tape(&model.params());
    for (int b = tid; b < B; b += threads) {
      tape.clear();
      const auto noise = draw_noise(*batch[b], model.config().edge_types, traj_seed[b]);
      const Var per_step = model.neg_elbo_per_step(tape, *batch[b], noise);
      const Var root = tape.mul_const(per_step, 1.0 / B);
      nelbo[b] = tape.value(per_step);
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

  double mean_loss = 0.0;
  for (int b = 0; b < B; ++b) {
    if (!std::isfinite(nelbo[b]))
      throw TrainingDiverged("non-finite ELBO in batch element " + std::to_string(b), b);
    mean_loss += nelbo[b] / B;
  }
  auto grads = model.params().grads();
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < P; ++i) grads[i] += gbuf[b][i];

  const auto& e = model.params().entry("coeffs");
  auto vals = model.params().values();
  const double lambda = model.config().base.lambda_l1;
  double penalty = 0.0;
  for (int i = 0; i < e.size; ++i) {
    const double w = vals[e.offset + i];
    penalty += std::abs(w);
    if (w != 0.0) grads[e.offset + i] += lambda * (w > 0 ? 1.0 : -1.0);
  }
  return mean_loss + lambda * penalty;
}

double mio_loss_and_grad_frozen(MioModel& model, const sim::Trajectory& traj,
                                std::span<const double> gumbel_noise) {
  ad::Tape tape(&model.params());
  tape.clear();
  const Var per_step = model.neg_elbo_per_step(tape, traj, gumbel_noise);
  const double value = tape.value(per_step);
  tape.backward(per_step);
  const auto& e = model.params().entry("coeffs");
  auto vals = model.params().values();
  auto grads = model.params().grads();
  const double lambda = model.config().base.lambda_l1;
  double penalty = 0.0;
  for (int i = 0; i < e.size; ++i) {
    const double w = vals[e.offset + i];
    penalty += std::abs(w);
    if (w != 0.0) grads[e.offset + i] += lambda * (w > 0 ? 1.0 : -1.0);
  }
  return value + lambda * penalty;
}

double mio_loss_value(const MioModel& model, std::span<const sim::Trajectory* const> batch,
                      std::uint64_t noise_seed) {
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw std::invalid_argument("mio loss: empty batch");
  auto& store = const_cast<ad::ParamStore&>(model.params());
  ad::Tape tape(&store);
  Rng seed_rng(noise_seed);
  double mean_loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const std::uint64_t s = seed_rng.next_u64();
    tape.clear();
    const auto noise = draw_noise(*batch[b], model.config().edge_types, s);
    const Var per_step = model.neg_elbo_per_step(tape, *batch[b], noise);
    mean_loss += tape.value(per_step) / B;
  }
  double penalty = 0.0;
  for (double w : model.params().values_of("coeffs")) penalty += std::abs(w);
  return mean_loss + model.config().base.lambda_l1 * penalty;
}

double mio_segmentation_accuracy(const MioModel& model,
                                 const std::vector<sim::Trajectory>& split,
                                 int true_mode_count) {
  std::vector<int> pred, truth;
  for (const auto& traj : split) {
    const auto eval = model.evaluate(traj);
    for (int n = 0; n < traj.objects; ++n) {
      const auto& dec = eval.per_object[n].decoded_modes;
      pred.insert(pred.end(), dec.begin(), dec.end());
      for (int t = 0; t < traj.steps; ++t) truth.push_back(traj.mode(t, n));
    }
  }
  const auto score =
      metrics::hungarian_accuracy_f1(pred, truth, model.num_modes(), true_mode_count);
  return score.accuracy;
}

TrainResult train_mio(MioModel& model, const sim::Dataset& data, const TrainSchedule& schedule) {
  if (data.train.empty()) throw std::invalid_argument("train_mio: empty training split");

  TrainSchedule sched = schedule;
  sched.lr.total_steps = sched.steps;

  ad::Adam opt(model.params(), sched.adam);
  opt.set_lr_scale("coeffs", sched.coeff_lr_scale);
  opt.set_lr_scale("init_mean", sched.coeff_lr_scale);
  opt.set_lr_scale("emission_log_std", sched.sigma_lr_scale);
  opt.set_lr_scale("init_log_std", sched.sigma_lr_scale);

  Rng root(sched.seed);
  Rng shuffle_rng = root.split(0xba7c4);
  Rng noise_root = root.split(0x6b71);

  const int n_train = static_cast<int>(data.train.size());
  std::vector<int> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  int cursor = n_train;

  TrainResult result;
  std::vector<double> snapshot(model.params().values().begin(), model.params().values().end());
  std::vector<const sim::Trajectory*> batch;

  const int B = std::min(sched.batch_size, n_train);
  for (int step = 0; step < sched.steps; ++step) {
    batch.clear();
    for (int i = 0; i < B; ++i) {
      if (cursor >= n_train) {
        for (int j = n_train - 1; j > 0; --j)
          std::swap(order[j], order[shuffle_rng.uniform_int(0, j)]);
        cursor = 0;
      }
      batch.push_back(&data.train[order[cursor++]]);
    }

    model.params().zero_grad();
    double loss = 0.0;
    try {
      loss = mio_loss_and_grad(model, batch, noise_root.next_u64(), sched.threads);
    } catch (const TrainingDiverged&) {
      std::copy(snapshot.begin(), snapshot.end(), model.params().values().begin());
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    if (!std::isfinite(loss)) {
      std::copy(snapshot.begin(), snapshot.end(), model.params().values().begin());
      result.diverged = true;
      result.diverged_step = step;
      break;
    }
    opt.step(sched.lr, step);

    if (step % sched.eval_interval == 0 || step + 1 == sched.steps) {
      double l1 = 0.0;
      for (double w : model.params().values_of("coeffs")) l1 += std::abs(w);
      double val_acc = 0.0;
      if (!data.val.empty())
        val_acc = mio_segmentation_accuracy(model, data.val, data.spec.mode_count);
      result.log.push_back({step, loss - model.config().base.lambda_l1 * l1, l1, val_acc});
      result.final_val_accuracy = val_acc;
      snapshot.assign(model.params().values().begin(), model.params().values().end());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// forecasting: joint filter over objects; edges from the posterior argmax

Forecast MioModel::forecast(const sim::Trajectory& traj, int object, int context_len,
                            int horizon, ForecastMode fmode) const {
  if (horizon < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
  if (context_len < 1 || context_len > traj.steps)
    throw std::invalid_argument("forecast: bad context length");
  if (fmode == ForecastMode::OneStep && context_len + horizon > traj.steps)
    throw std::invalid_argument("forecast: one-step mode needs ground truth over the horizon");
  if (object < 0 || object >= traj.objects)
    throw std::invalid_argument("forecast: object out of range");

  const auto& cfg = config_.base;
  const int K = cfg.num_modes, M = state_dim_, N = traj.objects, L = config_.edge_types;
  const int D = cfg.use_count_variables ? cfg.d_max : 1;
  const CoefficientTensor w = coefficients();

  // edges over the whole trajectory where truth exists; beyond that the last
  // context edges persist (multi-step mode)
  const auto eval_edges = [&]() {
    const auto logits = edge_posterior_logits(traj);
    EdgeSample e;
    e.steps = traj.steps;
    e.pairs = N * N;
    e.types = L;
    e.relaxed.assign(logits.size(), 0.0);
    e.hard.resize(static_cast<std::size_t>(traj.steps) * N * N);
    for (std::size_t row = 0; row < logits.size() / L; ++row) {
      int best = 0;
      for (int l = 1; l < L; ++l)
        if (logits[row * L + l] > logits[row * L + best]) best = l;
      e.hard[row] = best;
      e.relaxed[row * L + best] = 1.0;
    }
    return e;
  };
  const EdgeSample edges = eval_edges();

  std::vector<double> mu(static_cast<std::size_t>(K) * D, 1.0);
  if (cfg.use_count_variables)
    for (int k = 0; k < K; ++k)
      for (int c = 1; c <= cfg.d_max; ++c) {
        // mirror AmoreModel::count_continue_prob from the shared hazard layout
        const int R = cfg.d_max - cfg.d_min + 1;
        auto h = store_.values_of("hazard").subspan(static_cast<std::size_t>(k) * R, R);
        double v = 1.0;
        if (c >= cfg.d_min) {
          if (c == cfg.d_max) v = 0.0;
          else {
            const auto s = detail::suffix_logsum(h);
            v = std::exp(s[c - cfg.d_min + 1] - s[c - cfg.d_min]);
          }
        }
        mu[static_cast<std::size_t>(k) * D + (c - 1)] = v;
      }

  auto normalize = [](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s > 0.0)
      for (double& x : v) x /= s;
  };

  auto im = store_.values_of("init_mean");
  auto ils = store_.values_of("init_log_std");
  auto els = store_.values_of("emission_log_std");
  std::vector<double> istd(M), estd(static_cast<std::size_t>(K) * M);
  for (std::size_t i = 0; i < estd.size(); ++i) estd[i] = cfg.sigma_floor + std::exp(els[i]);
  const auto logpi = [&] {
    auto logits = store_.values_of("pi_logits");
    std::vector<double> lp(logits.begin(), logits.end());
    const double z = ad::logsumexp(lp);
    for (auto& v : lp) v -= z;
    return lp;
  }();

  std::vector<std::vector<double>> p(N, std::vector<double>(static_cast<std::size_t>(K) * D, 0.0));
  std::vector<std::vector<double>> pred(N, std::vector<double>(static_cast<std::size_t>(K) * D));
  for (int n = 0; n < N; ++n) {
    std::vector<double> ll(K);
    for (int k = 0; k < K; ++k) {
      for (int m = 0; m < M; ++m) istd[m] = cfg.sigma_floor + std::exp(ils[k * M + m]);
      ll[k] = logpi[k] + ad::gaussian_logpdf(traj.state(0, n),
                                             im.subspan(static_cast<std::size_t>(k) * M, M), istd);
    }
    const double mx = *std::max_element(ll.begin(), ll.end());
    for (int k = 0; k < K; ++k) p[n][static_cast<std::size_t>(k) * D + 0] = std::exp(ll[k] - mx);
    normalize(p[n]);
  }

  std::vector<double> y_all(static_cast<std::size_t>(N) * M);
  for (int n = 0; n < N; ++n) {
    const auto s = traj.state(0, n);
    std::copy(s.begin(), s.end(), y_all.begin() + static_cast<std::size_t>(n) * M);
  }

  std::vector<double> mean(M), reset_mass(K), mode_marg(K), emll(K);
  auto push_predict = [&](int n, std::span<const double> edges_at_t) {
    const auto trans = interaction_mode_transition(y_all, edges_at_t, n);
    auto& pn = p[n];
    auto& prn = pred[n];
    std::fill(prn.begin(), prn.end(), 0.0);
    if (!cfg.use_count_variables) {
      for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int j = 0; j < K; ++j) s += pn[j] * trans[static_cast<std::size_t>(j) * K + k];
        prn[k] = s;
      }
      return;
    }
    for (int j = 0; j < K; ++j) {
      double s = 0.0;
      for (int c = cfg.d_min - 1; c < D; ++c)
        s += (1.0 - mu[static_cast<std::size_t>(j) * D + c]) * pn[static_cast<std::size_t>(j) * D + c];
      reset_mass[j] = s;
    }
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int j = 0; j < K; ++j) s += reset_mass[j] * trans[static_cast<std::size_t>(j) * K + k];
      prn[static_cast<std::size_t>(k) * D + 0] = s;
      for (int c = 1; c < D; ++c)
        prn[static_cast<std::size_t>(k) * D + c] =
            mu[static_cast<std::size_t>(k) * D + (c - 1)] * pn[static_cast<std::size_t>(k) * D + (c - 1)];
    }
  };

  auto edges_at = [&](int t) {
    const int tt = std::min(t, traj.steps - 1);
    return std::span<const double>(edges.relaxed)
        .subspan(static_cast<std::size_t>(tt) * N * N * L, static_cast<std::size_t>(N) * N * L);
  };

  // context filtering
  for (int t = 1; t < context_len; ++t) {
    for (int n = 0; n < N; ++n) push_predict(n, edges_at(t));
    for (int n = 0; n < N; ++n) {
      const auto y_prev_n = traj.state(t - 1, n);
      const auto y_t = traj.state(t, n);
      for (int k = 0; k < K; ++k) {
        detail::emission_mean_plain(lib_, w, cfg, y_prev_n, k, traj.dt, mean);
        emll[k] = ad::gaussian_logpdf(
            y_t, mean, std::span<const double>(estd).subspan(static_cast<std::size_t>(k) * M, M));
      }
      const double mx = *std::max_element(emll.begin(), emll.end());
      for (int k = 0; k < K; ++k) {
        const double wgt = std::exp(emll[k] - mx);
        for (int c = 0; c < D; ++c) pred[n][static_cast<std::size_t>(k) * D + c] *= wgt;
      }
      p[n] = pred[n];
      normalize(p[n]);
    }
    for (int n = 0; n < N; ++n) {
      const auto s = traj.state(t, n);
      std::copy(s.begin(), s.end(), y_all.begin() + static_cast<std::size_t>(n) * M);
    }
  }

  Forecast out;
  out.horizon = horizon;
  out.state_dim = M;
  out.predictions.resize(static_cast<std::size_t>(horizon) * M);
  out.predicted_modes.resize(horizon);

  std::vector<std::vector<double>> yhat(N, std::vector<double>(M));
  for (int hstep = 0; hstep < horizon; ++hstep) {
    const int t = context_len + hstep;
    for (int n = 0; n < N; ++n) push_predict(n, edges_at(fmode == ForecastMode::OneStep ? t : context_len - 1));
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k) {
        double s = 0.0;
        for (int c = 0; c < D; ++c) s += pred[n][static_cast<std::size_t>(k) * D + c];
        mode_marg[k] = s;
      }
      int khat = 0;
      for (int k = 1; k < K; ++k)
        if (mode_marg[k] > mode_marg[khat]) khat = k;
      const std::span<const double> y_prev_n(y_all.data() + static_cast<std::size_t>(n) * M,
                                             static_cast<std::size_t>(M));
      detail::emission_mean_plain(lib_, w, cfg, y_prev_n, khat, traj.dt, yhat[n]);
      if (n == object) {
        std::copy(yhat[n].begin(), yhat[n].end(),
                  out.predictions.begin() + static_cast<std::size_t>(hstep) * M);
        out.predicted_modes[hstep] = khat;
      }
    }
    if (fmode == ForecastMode::OneStep) {
      for (int n = 0; n < N; ++n) {
        const std::span<const double> y_prev_n(y_all.data() + static_cast<std::size_t>(n) * M,
                                               static_cast<std::size_t>(M));
        const auto y_t = traj.state(t, n);
        for (int k = 0; k < K; ++k) {
          detail::emission_mean_plain(lib_, w, cfg, y_prev_n, k, traj.dt, mean);
          emll[k] = ad::gaussian_logpdf(
              y_t, mean, std::span<const double>(estd).subspan(static_cast<std::size_t>(k) * M, M));
        }
        const double mx = *std::max_element(emll.begin(), emll.end());
        for (int k = 0; k < K; ++k) {
          const double wgt = std::exp(emll[k] - mx);
          for (int c = 0; c < D; ++c) pred[n][static_cast<std::size_t>(k) * D + c] *= wgt;
        }
        p[n] = pred[n];
        normalize(p[n]);
      }
      for (int n = 0; n < N; ++n) {
        const auto s = traj.state(t, n);
        std::copy(s.begin(), s.end(), y_all.begin() + static_cast<std::size_t>(n) * M);
      }
    } else {
      for (int n = 0; n < N; ++n) {
        p[n] = pred[n];
        normalize(p[n]);
        std::copy(yhat[n].begin(), yhat[n].end(), y_all.begin() + static_cast<std::size_t>(n) * M);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpointing

std::string MioModel::config_meta_json() const {
  nlohmann::json j = nlohmann::json::parse(detail::amore_meta_json(config_.base, state_dim_));
  j["model"] = "amore_mio";
  j["mio"] = {{"num_objects", config_.num_objects},
              {"edge_types", config_.edge_types},
              {"tau_e", config_.tau_e},
              {"gumbel_tau", config_.gumbel_tau},
              {"edge_prior", config_.edge_prior}};
  return j.dump();
}

void MioModel::save_checkpoint(const std::string& path) const {
  store_.save_json(path, config_meta_json());
}

void MioModel::load_checkpoint(const std::string& path) { store_.load_json(path); }

MioModel MioModel::from_checkpoint(const std::string& path) {
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    in >> j;
  }
  if (!j.contains("meta")) throw std::runtime_error("checkpoint missing model meta: " + path);
  const auto meta = j["meta"];
  int state_dim = 0;
  MioConfig cfg;
  cfg.base = AmoreModel::config_from_meta(meta.dump(), &state_dim);
  cfg.num_objects = meta.at("mio").at("num_objects").get<int>();
  cfg.edge_types = meta.at("mio").at("edge_types").get<int>();
  cfg.tau_e = meta.at("mio").at("tau_e").get<double>();
  cfg.gumbel_tau = meta.at("mio").at("gumbel_tau").get<double>();
  cfg.edge_prior = meta.at("mio").at("edge_prior").get<std::vector<double>>();
  Rng rng(0);
  MioModel model(cfg, state_dim, rng);
  model.load_checkpoint(path);
  return model;
}

}  // namespace amore
