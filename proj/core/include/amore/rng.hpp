#pragma once

#include <cstdint>

namespace amore {

// Deterministic xoshiro256++ generator seeded through splitmix64.
// Every random draw in the library goes through this class so that datasets,
// initializations and training runs are reproducible byte-for-byte. Streams
// for independent components are derived with split(), never by sharing a
// generator across consumers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);
  // Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double std);
  // Gumbel(0, 1).
  double gumbel();

  // Independent child stream; deterministic function of (state seed, id).
  Rng split(std::uint64_t stream_id) const;

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace amore
