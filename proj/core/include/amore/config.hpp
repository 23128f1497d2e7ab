#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amore/mio.hpp"
#include "amore/model.hpp"
#include "amore/sim/systems.hpp"
#include "amore/train.hpp"

namespace amore {

// Fully-resolved experiment description. Loaded from a sectioned
// `key = value` file; command-line overrides (`section.key=value`) win over
// file values. The resolved form (defaults included) serializes to run.json
// so a run can be replayed bit-identically.
struct ExperimentConfig {
  // [experiment]
  std::string system = "mass_spring";
  std::string model_family = "amore";  // amore | amore_mio | twostage
  std::string output_dir = "runs/out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string dataset_dir;  // when set, datasets are loaded instead of generated

  // [data]
  int n_train = 40, n_val = 8, n_test = 8;
  int horizon = 0;          // 0 -> system default
  double dt = 0.0;          // 0 -> system default
  double noise_std = 1e-6;
  int objects = 0;          // 0 -> system default
  double particle_radius = 2.0;
  int integration_substeps = 0;  // 0 -> system default

  // [model]
  AmoreConfig model;
  int edge_types = 2;
  double tau_e = 1.0;
  double gumbel_tau = 0.5;
  double edge_prior0 = 0.9;

  // [train]
  TrainSchedule train;

  // [eval]
  int context_len = 100;
  int forecast_horizon = 50;
  std::string forecast_mode = "one_step";  // one_step | multi_step
  double prune_threshold = 0.05;
  // [twostage]
  int knn_neighbors = 24;
  double stls_threshold = 0.1;

  static ExperimentConfig load(const std::string& path,
                               const std::vector<std::string>& overrides = {});
  static ExperimentConfig from_overrides(const std::vector<std::string>& overrides);

  sim::SystemSpec system_spec() const;
  MioConfig mio_config() const;
  std::string resolved_json() const;

  void validate() const;
};

}  // namespace amore
