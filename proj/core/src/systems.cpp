#include "amore/sim/systems.hpp"

#include <stdexcept>

namespace amore::sim {

std::string to_string(SystemName name) {
  switch (name) {
    case SystemName::MassSpringHopper: return "mass_spring";
    case SystemName::SIR: return "sir";
    case SystemName::OdeParticles: return "particles";
    case SystemName::CoupledLinear: return "coupled_linear";
    case SystemName::CubicOscillator: return "cubic_oscillator";
    case SystemName::Lorenz63: return "lorenz63";
    case SystemName::HopfBifurcation: return "hopf";
    case SystemName::SelkovGlycolysis: return "selkov";
    case SystemName::DuffingOscillator: return "duffing";
    case SystemName::CustomHybrid: return "custom_hybrid";
  }
  return "unknown";
}

SystemName system_from_string(const std::string& s) {
  if (s == "mass_spring") return SystemName::MassSpringHopper;
  if (s == "sir") return SystemName::SIR;
  if (s == "particles") return SystemName::OdeParticles;
  if (s == "coupled_linear") return SystemName::CoupledLinear;
  if (s == "cubic_oscillator") return SystemName::CubicOscillator;
  if (s == "lorenz63") return SystemName::Lorenz63;
  if (s == "hopf") return SystemName::HopfBifurcation;
  if (s == "selkov") return SystemName::SelkovGlycolysis;
  if (s == "duffing") return SystemName::DuffingOscillator;
  if (s == "custom_hybrid") return SystemName::CustomHybrid;
  throw std::invalid_argument("unknown system: " + s);
}

bool is_nonhybrid(SystemName name) {
  switch (name) {
    case SystemName::CoupledLinear:
    case SystemName::CubicOscillator:
    case SystemName::Lorenz63:
    case SystemName::HopfBifurcation:
    case SystemName::SelkovGlycolysis:
    case SystemName::DuffingOscillator:
      return true;
    default:
      return false;
  }
}

namespace {

int expected_state_dim(SystemName name) {
  switch (name) {
    case SystemName::MassSpringHopper: return 2;
    case SystemName::SIR: return 2;
    case SystemName::OdeParticles: return 2;
    case SystemName::CoupledLinear: return 4;
    case SystemName::CubicOscillator: return 2;
    case SystemName::Lorenz63: return 3;
    case SystemName::HopfBifurcation: return 2;
    case SystemName::SelkovGlycolysis: return 2;
    case SystemName::DuffingOscillator: return 2;
    case SystemName::CustomHybrid: return 0;  // caller-defined
  }
  return 0;
}

int expected_mode_count(SystemName name) {
  switch (name) {
    case SystemName::MassSpringHopper: return 2;
    case SystemName::SIR: return 2;
    case SystemName::OdeParticles: return 4;
    case SystemName::CustomHybrid: return 0;
    default: return 1;
  }
}

}  // namespace

void SystemSpec::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("spec: dt must be > 0");
  if (horizon < 2) throw std::invalid_argument("spec: horizon must be >= 2");
  if (noise_std < 0.0) throw std::invalid_argument("spec: noise_std must be >= 0");
  if (state_dim < 1) throw std::invalid_argument("spec: state_dim must be >= 1");
  if (object_count < 1) throw std::invalid_argument("spec: object_count must be >= 1");
  if (integration_substeps < 1) throw std::invalid_argument("spec: substeps must be >= 1");
  if (name != SystemName::CustomHybrid) {
    if (state_dim != expected_state_dim(name))
      throw std::invalid_argument("spec: state_dim does not match system " + to_string(name));
    if (mode_count != expected_mode_count(name))
      throw std::invalid_argument("spec: mode_count does not match system " + to_string(name));
  }
  if (name != SystemName::OdeParticles && object_count != 1)
    throw std::invalid_argument("spec: object_count must be 1 for single-object systems");
}

SystemSpec SystemSpec::standard(SystemName name, std::uint64_t seed) {
  SystemSpec s;
  s.name = name;
  s.rng_seed = seed;
  s.state_dim = expected_state_dim(name);
  s.mode_count = expected_mode_count(name);
  switch (name) {
    case SystemName::MassSpringHopper:
      s.dt = 0.033;
      s.horizon = 150;
      break;
    case SystemName::SIR:
      s.dt = 1.0;  // daily sampling
      s.horizon = 730;
      s.integration_substeps = 4;
      break;
    case SystemName::OdeParticles:
      s.dt = 0.1;  // 10 frames per second
      s.horizon = 150;
      s.object_count = 2;
      s.integration_substeps = 10;
      break;
    case SystemName::Lorenz63:
      s.dt = 0.01;
      s.horizon = 500;
      break;
    default:
      s.dt = 0.02;
      s.horizon = 400;
      break;
  }
  return s;
}

int mass_spring_mode(double l) { return l <= 1.0 ? 0 : 1; }

void mass_spring_rhs(int mode, std::span<const double> y, std::span<double> dy) {
  const double l = y[0], v = y[1];
  dy[0] = v;
  dy[1] = mode == 0 ? 11.0 - 10.0 * l : -1.0;
}

bool sir_in_session(int day) {
  const int d = day % 365;
  return (d >= 35 && d < 155) || (d >= 225 && d < 365);
}

void sir_rhs(int mode, std::span<const double> y, std::span<double> dy) {
  const double S = y[0], I = y[1];
  const double b = mode == 1 ? 0.0168 : 0.0052;  // mode 1 = school in session
  dy[0] = 2.74 - b * I * S - 0.0027 * S;
  dy[1] = b * I * S - 0.20 * I;
}

void particle_rhs(int mode, std::span<const double> y, std::span<double> dy) {
  const double x = y[0], yy = y[1];
  switch (mode) {
    case 0:  // Lotka-Volterra
      dy[0] = x - x * yy;
      dy[1] = -yy + x * yy;
      break;
    case 1:  // Spiral
      dy[0] = -0.1 * x * x * x + 2.0 * yy * yy * yy;
      dy[1] = -2.0 * x * x * x - 0.1 * yy * yy * yy;
      break;
    case 2:  // Ball+
      dy[0] = 0.0;
      dy[1] = 2.0;
      break;
    case 3:  // Ball-
      dy[0] = 0.0;
      dy[1] = -2.0;
      break;
    default:
      throw std::invalid_argument("particle_rhs: mode out of range");
  }
}

void nonhybrid_rhs(SystemName name, std::span<const double> y, std::span<double> dy) {
  switch (name) {
    case SystemName::CoupledLinear: {
      // second-order pair x'' = -6x + 2y, y'' = 2x - 6y as a 4-d first-order system
      dy[0] = y[2];
      dy[1] = y[3];
      dy[2] = -6.0 * y[0] + 2.0 * y[1];
      dy[3] = 2.0 * y[0] - 6.0 * y[1];
      break;
    }
    case SystemName::CubicOscillator:
      dy[0] = -0.1 * y[0] * y[0] * y[0] + 2.0 * y[1] * y[1] * y[1];
      dy[1] = -2.0 * y[0] * y[0] * y[0] - 0.1 * y[1] * y[1] * y[1];
      break;
    case SystemName::Lorenz63:
      dy[0] = 10.0 * y[1] - 10.0 * y[0];
      dy[1] = 28.0 * y[0] - y[0] * y[2] - y[1];
      dy[2] = y[0] * y[1] - 2.67 * y[2];
      break;
    case SystemName::HopfBifurcation:
      dy[0] = 0.5 * y[0] + y[1] - y[0] * y[0] * y[0] - y[0] * y[1] * y[1];
      dy[1] = -y[0] + 0.5 * y[1] - y[0] * y[0] * y[1] - y[1] * y[1] * y[1];
      break;
    case SystemName::SelkovGlycolysis:
      dy[0] = -y[0] + 0.08 * y[1] + y[0] * y[0] * y[1];
      dy[1] = 0.6 - 0.08 * y[1] - y[0] * y[0] * y[1];
      break;
    case SystemName::DuffingOscillator:
      dy[0] = y[1];
      dy[1] = -y[0] * y[0] * y[0] + y[0] - 0.35 * y[1];
      break;
    default:
      throw std::invalid_argument("nonhybrid_rhs: not a non-hybrid system");
  }
}

}  // namespace amore::sim
