#pragma once

#include <stdexcept>
#include <string>

namespace amore {

// Thrown when an ODE integration produces a non-finite or otherwise
// inadmissible state.
class SimulationDiverged : public std::runtime_error {
 public:
  explicit SimulationDiverged(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a training loss becomes non-finite. Carries the step index at
// which the divergence was detected.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace amore
