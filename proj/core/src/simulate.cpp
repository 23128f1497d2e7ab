#include "amore/sim/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "amore/errors.hpp"
#include "amore/rng.hpp"

namespace amore::sim {

void rk4_step(const Rhs& f, std::span<double> y, double h) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  f(y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
  f(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
  f(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  f(tmp, k4);
  for (std::size_t i = 0; i < n; ++i)
    y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

void integrate_interval(const Rhs& f, std::span<double> y, double dt, int substeps) {
  const double h = dt / substeps;
  for (int s = 0; s < substeps; ++s) rk4_step(f, y, h);
  for (double v : y) {
    if (!std::isfinite(v)) throw SimulationDiverged("non-finite state during integration");
  }
}

namespace {

void add_noise(Trajectory& traj, double noise_std, Rng& rng) {
  if (noise_std <= 0.0) return;
  for (double& v : traj.observations) v += rng.normal(0.0, noise_std);
}

Trajectory make_trajectory(const SystemSpec& spec) {
  Trajectory traj;
  traj.steps = spec.horizon;
  traj.objects = spec.object_count;
  traj.state_dim = spec.state_dim;
  traj.dt = spec.dt;
  traj.observations.assign(
      static_cast<std::size_t>(spec.horizon) * spec.object_count * spec.state_dim, 0.0);
  traj.modes.assign(static_cast<std::size_t>(spec.horizon) * spec.object_count, 0);
  return traj;
}

}  // namespace

Trajectory simulate_mass_spring(double initial_l, double initial_v, const SystemSpec& spec) {
  if (spec.name != SystemName::MassSpringHopper)
    throw std::invalid_argument("simulate_mass_spring: wrong system spec");
  spec.validate();
  Trajectory traj = make_trajectory(spec);
  traj.initial_state = {initial_l, initial_v};

  std::vector<double> y = {initial_l, initial_v};
  for (int t = 0; t < spec.horizon; ++t) {
    // guard evaluated at the sample boundary; mode held across the interval
    const int mode = mass_spring_mode(y[0]);
    traj.mode(t) = mode;
    traj.obs(t, 0, 0) = y[0];
    traj.obs(t, 0, 1) = y[1];
    if (t + 1 < spec.horizon) {
      integrate_interval([mode](std::span<const double> s, std::span<double> d) {
        mass_spring_rhs(mode, s, d);
      }, y, spec.dt, spec.integration_substeps);
    }
  }
  Rng rng(spec.rng_seed);
  add_noise(traj, spec.noise_std, rng);
  return traj;
}

Trajectory simulate_sir(double initial_S, double initial_I, double initial_R,
                        const SystemSpec& spec) {
  if (spec.name != SystemName::SIR) throw std::invalid_argument("simulate_sir: wrong system spec");
  spec.validate();
  Trajectory traj = make_trajectory(spec);
  traj.initial_state = {initial_S, initial_I, initial_R};

  Rng rng(spec.rng_seed);
  Rng perturb_rng = rng.split(1);

  std::vector<double> y = {initial_S, initial_I};
  bool prev_in = sir_in_session(0);
  for (int t = 0; t < spec.horizon; ++t) {
    const bool in_session = sir_in_session(t);
    if (in_session && !prev_in) {
      // integer shock at each session start; populations stay nonnegative
      const double dS = perturb_rng.uniform_int(-2, 2);
      const double dI = perturb_rng.uniform_int(-2, 2);
      perturb_rng.uniform_int(-2, 2);  // R is tracked implicitly; keep the draw
      y[0] = std::max(0.0, y[0] + dS);
      y[1] = std::max(0.0, y[1] + dI);
    }
    prev_in = in_session;
    const int mode = in_session ? 1 : 0;
    traj.mode(t) = mode;
    traj.obs(t, 0, 0) = y[0];
    traj.obs(t, 0, 1) = y[1];
    if (t + 1 < spec.horizon) {
      integrate_interval([mode](std::span<const double> s, std::span<double> d) {
        sir_rhs(mode, s, d);
      }, y, spec.dt, spec.integration_substeps);
      if (y[0] < 0.0 || y[1] < 0.0)
        throw SimulationDiverged("negative population in SIR integration");
    }
  }
  add_noise(traj, spec.noise_std, rng);
  return traj;
}

double particle_canvas_scale() { return 4.0; }
double particle_canvas_offset() { return 32.0; }

Trajectory simulate_particles(const SystemSpec& spec, double radius) {
  if (spec.name != SystemName::OdeParticles)
    throw std::invalid_argument("simulate_particles: wrong system spec");
  spec.validate();
  if (spec.object_count < 2)
    throw std::invalid_argument("simulate_particles: needs at least two objects");

  const int N = spec.object_count;
  Trajectory traj = make_trajectory(spec);
  Rng rng(spec.rng_seed);
  Rng init_rng = rng.split(1);

  std::vector<std::vector<double>> y(N, std::vector<double>(2));
  std::vector<int> mode(N);
  for (int n = 0; n < N; ++n) {
    mode[n] = init_rng.uniform_int(0, 3);
    switch (mode[n]) {
      case 0:  // Lotka-Volterra cycles live in the positive quadrant
        y[n] = {init_rng.uniform(0.5, 2.0), init_rng.uniform(0.5, 2.0)};
        break;
      case 1:
        y[n] = {init_rng.uniform(-1.5, 1.5), init_rng.uniform(-1.5, 1.5)};
        break;
      default:
        y[n] = {init_rng.uniform(-2.0, 2.0), init_rng.uniform(-2.0, 2.0)};
        break;
    }
    traj.initial_state.insert(traj.initial_state.end(), y[n].begin(), y[n].end());
  }

  const double cs = particle_canvas_scale();
  const double co = particle_canvas_offset();
  auto canvas_dist = [&](int a, int b) {
    const double dx = (co + cs * y[a][0]) - (co + cs * y[b][0]);
    const double dy = (co + cs * y[a][1]) - (co + cs * y[b][1]);
    return std::sqrt(dx * dx + dy * dy);
  };

  std::vector<std::vector<bool>> touching(N, std::vector<bool>(N, false));
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b) touching[a][b] = canvas_dist(a, b) < 2.0 * radius;

  for (int t = 0; t < spec.horizon; ++t) {
    for (int n = 0; n < N; ++n) {
      traj.mode(t, n) = mode[n];
      traj.obs(t, n, 0) = y[n][0];
      traj.obs(t, n, 1) = y[n][1];
    }
    if (t + 1 == spec.horizon) break;
    for (int n = 0; n < N; ++n) {
      const int m = mode[n];
      integrate_interval([m](std::span<const double> s, std::span<double> d) {
        particle_rhs(m, s, d);
      }, y[n], spec.dt, spec.integration_substeps);
    }
    // collision events swap the pair's modes, taking effect at the next sample;
    // a pair must separate beyond the contact radius before it can collide again
    for (int a = 0; a < N; ++a) {
      for (int b = a + 1; b < N; ++b) {
        const bool close = canvas_dist(a, b) < 2.0 * radius;
        if (close && !touching[a][b]) std::swap(mode[a], mode[b]);
        touching[a][b] = close;
      }
    }
  }
  add_noise(traj, spec.noise_std, rng);
  return traj;
}

Trajectory simulate_nonhybrid(const SystemSpec& spec, std::span<const double> initial_state) {
  if (!is_nonhybrid(spec.name))
    throw std::invalid_argument("simulate_nonhybrid: not a non-hybrid system");
  spec.validate();
  if (static_cast<int>(initial_state.size()) != spec.state_dim)
    throw std::invalid_argument("simulate_nonhybrid: initial state dimension mismatch");

  Trajectory traj = make_trajectory(spec);
  traj.initial_state.assign(initial_state.begin(), initial_state.end());
  std::vector<double> y(initial_state.begin(), initial_state.end());
  const SystemName name = spec.name;
  for (int t = 0; t < spec.horizon; ++t) {
    for (int m = 0; m < spec.state_dim; ++m) traj.obs(t, 0, m) = y[m];
    if (t + 1 < spec.horizon) {
      integrate_interval([name](std::span<const double> s, std::span<double> d) {
        nonhybrid_rhs(name, s, d);
      }, y, spec.dt, spec.integration_substeps);
    }
  }
  Rng rng(spec.rng_seed);
  add_noise(traj, spec.noise_std, rng);
  return traj;
}

}  // namespace amore::sim
