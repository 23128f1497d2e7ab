#pragma once

#include <functional>
#include <span>
#include <vector>

#include "amore/sim/systems.hpp"

namespace amore::sim {

// A labeled multivariate time series. observations is laid out
// [steps x objects x state_dim]; modes is [steps x objects].
struct Trajectory {
  int steps = 0;
  int objects = 1;
  int state_dim = 0;
  double dt = 0.0;
  std::vector<double> observations;
  std::vector<int> modes;
  std::vector<double> initial_state;  // per-object initial conditions, pre-noise

  double& obs(int t, int n, int m) {
    return observations[(static_cast<std::size_t>(t) * objects + n) * state_dim + m];
  }
  double obs(int t, int n, int m) const {
    return observations[(static_cast<std::size_t>(t) * objects + n) * state_dim + m];
  }
  std::span<const double> state(int t, int n = 0) const {
    return {observations.data() + (static_cast<std::size_t>(t) * objects + n) * state_dim,
            static_cast<std::size_t>(state_dim)};
  }
  int& mode(int t, int n = 0) { return modes[static_cast<std::size_t>(t) * objects + n]; }
  int mode(int t, int n = 0) const { return modes[static_cast<std::size_t>(t) * objects + n]; }
};

using Rhs = std::function<void(std::span<const double>, std::span<double>)>;

// One classical RK4 step of size h, in place.
void rk4_step(const Rhs& f, std::span<double> y, double h);

// Integrates `f` over one sampling interval of length dt using `substeps`
// equal RK4 steps. Throws SimulationDiverged on non-finite state.
void integrate_interval(const Rhs& f, std::span<double> y, double dt, int substeps);

Trajectory simulate_mass_spring(double initial_l, double initial_v, const SystemSpec& spec);
Trajectory simulate_sir(double initial_S, double initial_I, double initial_R,
                        const SystemSpec& spec);
Trajectory simulate_particles(const SystemSpec& spec, double radius);
Trajectory simulate_nonhybrid(const SystemSpec& spec, std::span<const double> initial_state);

// Canvas mapping for the particle system: ODE state -> 64x64 canvas.
double particle_canvas_scale();
double particle_canvas_offset();

}  // namespace amore::sim
