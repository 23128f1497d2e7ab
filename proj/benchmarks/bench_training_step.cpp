#include <benchmark/benchmark.h>

#include "amore/model.hpp"
#include "amore/rng.hpp"
#include "amore/sim/dataset.hpp"

namespace {

void BM_loss_and_grad(benchmark::State& state) {
  const int batch_size = static_cast<int>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const bool rk4 = state.range(2) != 0;

  amore::sim::SystemSpec spec =
      amore::sim::SystemSpec::standard(amore::sim::SystemName::MassSpringHopper, 5);
  const auto ds = amore::sim::build_dataset(spec, batch_size, 1, 1);
  std::vector<const amore::sim::Trajectory*> batch;
  for (const auto& t : ds.train) batch.push_back(&t);

  amore::Rng rng(3);
  amore::AmoreConfig cfg;
  cfg.num_modes = 3;
  cfg.d_min = 5;
  cfg.mean_integrator = rk4 ? amore::MeanIntegrator::Rk4 : amore::MeanIntegrator::Euler;
  amore::AmoreModel model(cfg, 2, rng);

  for (auto _ : state) {
    model.params().zero_grad();
    benchmark::DoNotOptimize(amore::loss_and_grad(model, batch, threads));
  }
  state.SetItemsProcessed(state.iterations() * batch_size);
}

}  // namespace

BENCHMARK(BM_loss_and_grad)
    ->Args({8, 1, 0})
    ->Args({8, 1, 1})
    ->Args({8, 2, 1})
    ->Args({40, 2, 1})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
