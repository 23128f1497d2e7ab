#include <benchmark/benchmark.h>

#include "amore/sim/dataset.hpp"
#include "amore/sim/simulate.hpp"

namespace {

void BM_mass_spring(benchmark::State& state) {
  amore::sim::SystemSpec spec =
      amore::sim::SystemSpec::standard(amore::sim::SystemName::MassSpringHopper, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(amore::sim::simulate_mass_spring(0.7, 0.2, spec));
  }
}

void BM_sir(benchmark::State& state) {
  amore::sim::SystemSpec spec = amore::sim::SystemSpec::standard(amore::sim::SystemName::SIR, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(amore::sim::simulate_sir(60.0, 5.0, 935.0, spec));
  }
}

void BM_particles(benchmark::State& state) {
  amore::sim::SystemSpec spec =
      amore::sim::SystemSpec::standard(amore::sim::SystemName::OdeParticles, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(amore::sim::simulate_particles(spec, spec.particle_radius));
  }
}

}  // namespace

BENCHMARK(BM_mass_spring)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_sir)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_particles)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
