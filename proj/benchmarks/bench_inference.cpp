#include <benchmark/benchmark.h>

#include "amore/model.hpp"
#include "amore/rng.hpp"

namespace {

amore::sim::Trajectory make_traj(amore::Rng& rng, int T, int M) {
  amore::sim::Trajectory traj;
  traj.steps = T;
  traj.objects = 1;
  traj.state_dim = M;
  traj.dt = 0.033;
  traj.observations.resize(static_cast<std::size_t>(T) * M);
  traj.modes.assign(T, 0);
  for (auto& v : traj.observations) v = rng.uniform(-1.0, 1.0);
  return traj;
}

void BM_forward_backward(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const int K = static_cast<int>(state.range(1));
  const int d_max = static_cast<int>(state.range(2));
  amore::Rng rng(7);
  amore::AmoreConfig cfg;
  cfg.num_modes = K;
  cfg.d_min = std::min(5, d_max);
  cfg.d_max = d_max;
  amore::AmoreModel model(cfg, 2, rng);
  const auto traj = make_traj(rng, T, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward_backward(traj).log_likelihood);
  }
  state.SetItemsProcessed(state.iterations() * T);
}

}  // namespace

BENCHMARK(BM_forward_backward)
    ->Args({150, 3, 50})
    ->Args({150, 5, 50})
    ->Args({730, 3, 50})
    ->Args({150, 10, 50})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
