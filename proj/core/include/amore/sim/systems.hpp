#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace amore::sim {

enum class SystemName {
  MassSpringHopper,
  SIR,
  OdeParticles,
  CoupledLinear,
  CubicOscillator,
  Lorenz63,
  HopfBifurcation,
  SelkovGlycolysis,
  DuffingOscillator,
  CustomHybrid,
};

std::string to_string(SystemName name);
SystemName system_from_string(const std::string& s);
bool is_nonhybrid(SystemName name);

struct SystemSpec {
  SystemName name = SystemName::MassSpringHopper;
  int state_dim = 2;       // M
  int mode_count = 2;
  double dt = 0.033;       // sampling interval
  int horizon = 150;       // T
  double noise_std = 1e-6;
  int object_count = 1;    // N (>1 only for OdeParticles)
  std::uint64_t rng_seed = 0;
  // Fine RK4 substeps per sampling interval. 1 suffices for the fast-sampled
  // systems; SIR at daily sampling needs substeps to stay within 1e-3 of the
  // true flow.
  int integration_substeps = 1;
  double particle_radius = 2.0;  // canvas units

  void validate() const;  // throws std::invalid_argument

  // Canonical spec for a named system: state dimension, mode count, sampling
  // interval and horizon per the benchmark definitions.
  static SystemSpec standard(SystemName name, std::uint64_t seed);
};

// Ground-truth vector fields. `mode` indexes the active regime; non-hybrid
// systems have a single mode 0.
void mass_spring_rhs(int mode, std::span<const double> y, std::span<double> dy);
void sir_rhs(int mode, std::span<const double> y, std::span<double> dy);
void particle_rhs(int mode, std::span<const double> y, std::span<double> dy);
void nonhybrid_rhs(SystemName name, std::span<const double> y, std::span<double> dy);

// Day schedule for the SIR system: in-session on days [35,155) and [225,365)
// of each 365-day year.
bool sir_in_session(int day);

// Mass-spring guard: compression while l <= 1.
int mass_spring_mode(double l);

}  // namespace amore::sim
