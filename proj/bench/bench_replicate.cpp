// Serial reference vs OpenMP replication of the same kernels.
#include <benchmark/benchmark.h>

#include "kbrw/brw_engine.hpp"
#include "kbrw/estimators.hpp"
#include "kbrw/parallel.hpp"

namespace {

const kbrw::StepModel& model() {
  static const kbrw::StepModel m = kbrw::calibrate_critical(kbrw::TwoPoint{}, 2);
  return m;
}

kbrw::MomentAccumulator progeny(std::uint64_t reps, int workers, bool serial) {
  const kbrw::BrwConfig cfg{0.0, std::nullopt, std::nullopt, kbrw::BrwCaps{}};
  auto make = [&] {
    return [sim = kbrw::BrwSimulator(model(), cfg)](kbrw::MomentAccumulator& acc, std::uint64_t rep) mutable {
      kbrw::Rng rng(11, rep);
      acc.add(static_cast<double>(sim(rng).Z));
    };
  };
  if (serial) return kbrw::replicate_serial<kbrw::MomentAccumulator>(reps, 2048, make);
  return kbrw::replicate<kbrw::MomentAccumulator>(reps, kbrw::Schedule{workers, 2048}, make);
}

void BM_ProgenySerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(progeny(static_cast<std::uint64_t>(state.range(0)), 1, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ProgenyOpenMP(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(progeny(static_cast<std::uint64_t>(state.range(0)), workers, false));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ManyToOne(benchmark::State& state) {
  kbrw::TreeMcOptions opts;
  opts.reps = static_cast<std::uint64_t>(state.range(0));
  opts.schedule.workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(kbrw::moment_Zak_many_to_one(model(), 10.0, 0.0, 10.0, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ProgenySerial)->Arg(100'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProgenyOpenMP)->Args({100'000, 1})->Args({100'000, 2})->Args({100'000, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ManyToOne)->Args({100'000, 1})->Args({100'000, 4})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
