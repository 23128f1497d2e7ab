#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amore/model.hpp"
#include "amore/train.hpp"

namespace amore {

struct MioConfig {
  AmoreConfig base;
  int num_objects = 2;  // N
  int edge_types = 2;   // L; type 0 = no interaction
  double tau_e = 1.0;   // edge-transition softmax temperature
  double gumbel_tau = 0.5;
  std::vector<double> edge_prior = {0.9, 0.1};

  void validate() const;
};

// Relaxed categorical edge samples for every step and directed pair
// (self-loops included), plus their hard argmax types.
struct EdgeSample {
  int steps = 0;
  int pairs = 0;  // N^2
  int types = 0;  // L
  std::vector<double> relaxed;  // [T x N^2 x L], each row on the simplex
  std::vector<int> hard;        // [T x N^2]

  double at(int t, int p, int l) const {
    return relaxed[(static_cast<std::size_t>(t) * pairs + p) * types + l];
  }
};

// Adds Gumbel(0,1) noise to the logits and applies a tempered softmax;
// differentiable in the logits (reparameterized) when built on a tape.
EdgeSample gumbel_sample(std::span<const double> logits, int steps, int pairs, int types,
                         double gumbel_tau, Rng& rng);

struct MioEval {
  std::vector<PosteriorSummary> per_object;
  EdgeSample edges;  // deterministic hard edges from the posterior argmax
  std::vector<double> edge_probs;  // posterior q(e) per [T x N^2 x L]
};

// Multi-object model: object-shared mode-specific equations, latent
// interaction edges with a transition network, per-edge-type interaction
// networks driving the mode transitions, and a two-round message-passing
// encoder for the edge posterior.
class MioModel {
 public:
  MioModel(const MioConfig& config, int state_dim, Rng& init_rng);

  const MioConfig& config() const { return config_; }
  const BasisLibrary& library() const { return lib_; }
  int state_dim() const { return state_dim_; }
  int num_modes() const { return config_.base.num_modes; }
  int num_objects() const { return config_.num_objects; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }
  CoefficientTensor coefficients() const;

  // mu_k(c), identical construction to the single-object model.
  double count_continue_prob(int mode, int count) const;
  void emission_mean(std::span<const double> y_prev, int mode, double dt,
                     std::span<double> out) const;

  // Encoder logits for every step and directed pair, [T x N^2 x L].
  std::vector<double> edge_posterior_logits(const sim::Trajectory& traj) const;

  // Row-stochastic K x K transition matrix for `object` given the previous
  // states of all objects and the edge vectors at the current step.
  std::vector<double> interaction_mode_transition(std::span<const double> y_prev_all,
                                                  std::span<const double> edges_at_t,
                                                  int object) const;

  // Exact per-object smoothing conditioned on the given edges.
  std::vector<PosteriorSummary> infer(const sim::Trajectory& traj,
                                      const EdgeSample& edges) const;

  // Posterior-argmax edges (no sampling noise) plus per-object smoothing.
  MioEval evaluate(const sim::Trajectory& traj) const;

  // Negative ELBO per step for one trajectory, built on the tape. The Gumbel
  // noise must be supplied (size T x N^2 x L); freezing it makes the loss a
  // deterministic differentiable function of the parameters.
  ad::Var neg_elbo_per_step(ad::Tape& tape, const sim::Trajectory& traj,
                            std::span<const double> gumbel_noise) const;

  Forecast forecast(const sim::Trajectory& traj, int object, int context_len, int horizon,
                    ForecastMode mode) const;

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);
  static MioModel from_checkpoint(const std::string& path);
  std::string config_meta_json() const;

 private:
  friend double mio_loss_and_grad(MioModel&, std::span<const sim::Trajectory* const>,
                                  std::uint64_t, int);
  MioConfig config_;
  int state_dim_;
  BasisLibrary lib_;
  ad::ParamStore store_;
  std::vector<ad::Mlp> interact_;  // f_l, one per edge type
  ad::Mlp edge_net_;               // f_e
  ad::Mlp enc_emb_, enc_e1_, enc_v1_, enc_e2_;
};

// Mean over the batch of the per-step negative ELBO plus the L1 coefficient
// penalty; gradient accumulates into the store. Gumbel noise is drawn from
// per-trajectory streams derived from noise_seed, so results are
// deterministic for any thread count.
double mio_loss_and_grad(MioModel& model, std::span<const sim::Trajectory* const> batch,
                         std::uint64_t noise_seed, int threads = 1);
double mio_loss_value(const MioModel& model, std::span<const sim::Trajectory* const> batch,
                      std::uint64_t noise_seed);

// Single-trajectory ELBO loss with caller-supplied Gumbel noise; exists so
// finite-difference checks can freeze the stochastic relaxation.
double mio_loss_and_grad_frozen(MioModel& model, const sim::Trajectory& traj,
                                std::span<const double> gumbel_noise);

TrainResult train_mio(MioModel& model, const sim::Dataset& data, const TrainSchedule& schedule);

double mio_segmentation_accuracy(const MioModel& model,
                                 const std::vector<sim::Trajectory>& split,
                                 int true_mode_count);

}  // namespace amore
