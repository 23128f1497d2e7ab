#pragma once

#include <span>
#include <string>
#include <vector>

#include "amore/ad/adam.hpp"
#include "amore/ad/param_store.hpp"
#include "amore/ad/tape.hpp"
#include "amore/basis.hpp"
#include "amore/rng.hpp"
#include "amore/sim/dataset.hpp"

namespace amore {

// Integrator used to map a candidate vector field to a one-step predictive
// mean. Euler is the plain first-order map y + f(y) dt; Rk4 takes classical
// Runge-Kutta steps of the same field, which removes the O(dt^2)
// discretization bias of the Euler map when the data comes from an accurate
// integration of the underlying flow.
enum class MeanIntegrator { Euler, Rk4 };

struct AmoreConfig {
  int num_modes = 3;  // K, upper bound on the number of modes
  int d_min = 20;
  int d_max = 50;
  double tau_z = 1.0;       // mode-transition softmax temperature
  double lambda_l1 = 1e-3;  // sparsity weight on basis coefficients
  double sigma_init = 0.1;  // emission noise init
  int degree = 2;           // polynomial degree of the basis library
  std::vector<ElementarySpec> extras;
  bool use_count_variables = true;
  int hidden_width = 32;
  MeanIntegrator mean_integrator = MeanIntegrator::Euler;
  int mean_substeps = 1;
  double sigma_floor = 1e-6;

  void validate() const;
};

struct PosteriorSummary {
  int steps = 0;
  int modes = 0;
  double log_likelihood = 0.0;
  std::vector<double> gamma;              // [T x K] smoothed mode marginals
  std::vector<double> gamma_joint;        // [T x K x d_max] when requested, else empty
  std::vector<double> log_alpha_beta_sum; // per-step logsumexp of alpha+beta
  std::vector<int> decoded_modes;

  double gamma_at(int t, int k) const { return gamma[static_cast<std::size_t>(t) * modes + k]; }
};

// Per-frame argmax of the smoothed mode marginals; ties break toward the
// lower mode index.
std::vector<int> decode_modes(const PosteriorSummary& summary);

enum class ForecastMode { OneStep, MultiStep };

struct Forecast {
  int horizon = 0;
  int state_dim = 0;
  std::vector<double> predictions;  // [H x M]
  std::vector<int> predicted_modes;
};

// Switching state-space model with explicit duration counts. Modes index
// sparse basis-regression emissions; counts gate when the mode-transition
// network may resample the mode.
class AmoreModel {
 public:
  AmoreModel(const AmoreConfig& config, int state_dim, Rng& init_rng);

  const AmoreConfig& config() const { return config_; }
  const BasisLibrary& library() const { return lib_; }
  int state_dim() const { return state_dim_; }
  int num_modes() const { return config_.num_modes; }
  ad::ParamStore& params() { return store_; }
  const ad::ParamStore& params() const { return store_; }

  // mu_k(c): probability that mode k continues at count c. Below d_min the
  // count must keep incrementing (mu = 1); at d_max a reset is forced.
  double count_continue_prob(int mode, int count) const;

  // Row-stochastic K x K matrix of p(z_t | z_{t-1}, c_t = 1, y_{t-1}).
  std::vector<double> mode_transition_matrix(std::span<const double> y_prev) const;

  void emission_mean(std::span<const double> y_prev, int mode, double dt,
                     std::span<double> out) const;
  double emission_loglik(std::span<const double> y_t, std::span<const double> y_prev,
                         int mode, double dt) const;
  double initial_emission_loglik(std::span<const double> y1, int mode) const;
  std::vector<double> initial_mode_logprobs() const;

  CoefficientTensor coefficients() const;
  std::vector<double> emission_std() const;  // [K x M]

  // Exact smoothing over (mode, count); log-space throughout.
  PosteriorSummary forward_backward(const sim::Trajectory& traj, int object = 0,
                                    bool want_joint = false) const;

  // Differentiable -log p(y) / T for one trajectory, built on `tape`.
  // `filtered` (optional) receives per-step filtered mode log-marginals.
  ad::Var nll_per_step(ad::Tape& tape, const sim::Trajectory& traj, int object = 0,
                       std::vector<ad::Var>* filtered = nullptr) const;

  Forecast forecast(const sim::Trajectory& traj, int object, int context_len, int horizon,
                    ForecastMode mode) const;

  // Serialization. meta carries the config so checkpoints are self-describing.
  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);
  static AmoreModel from_checkpoint(const std::string& path);

  std::string config_meta_json() const;
  static AmoreConfig config_from_meta(const std::string& meta_json, int* state_dim);

 private:
  AmoreConfig config_;
  int state_dim_;
  BasisLibrary lib_;
  ad::ParamStore store_;
  ad::Mlp mode_net_;
};

// Mean over the batch of per-step NLL plus the L1 penalty on the basis
// coefficients; accumulates the gradient into the model's parameter store
// (callers zero it first). Deterministic for any thread count.
double loss_and_grad(AmoreModel& model, std::span<const sim::Trajectory* const> batch,
                     int threads = 1);
// Loss value alone (no gradient); used by finite-difference checks.
double loss_value(const AmoreModel& model, std::span<const sim::Trajectory* const> batch);

}  // namespace amore
