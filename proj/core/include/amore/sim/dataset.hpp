#pragma once

#include <string>
#include <vector>

#include "amore/basis.hpp"
#include "amore/sim/simulate.hpp"

namespace amore::sim {

struct Dataset {
  std::vector<Trajectory> train, val, test;
  SystemSpec spec;

  const std::vector<Trajectory>& split(const std::string& name) const;
};

// Draws initial conditions from the per-system ranges, simulates each one and
// partitions into disjoint splits. Deterministic in spec.rng_seed.
Dataset build_dataset(const SystemSpec& spec, int n_train, int n_val, int n_test);

// One CSV per trajectory (header: t,obj,y_0..y_{M-1},mode) plus a JSON sidecar
// with the generating spec and split membership; a manifest JSON lists the
// file paths per split and the generation seed.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& manifest_path);

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path, double dt);

// Ground-truth coefficients of the generating equations expressed in `lib`
// (terms absent from the library are dropped). Hybrid systems return one
// coefficient slice per ground-truth mode.
CoefficientTensor ground_truth_coefficients(SystemName name, const BasisLibrary& lib);

}  // namespace amore::sim
