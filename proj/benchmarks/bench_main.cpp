#include <benchmark/benchmark.h>

#include "numalab/dataset.hpp"
#include "numalab/experiment.hpp"
#include "numalab/lru.hpp"
#include "numalab/simulator.hpp"

using namespace numalab;

namespace {

const Scenario& tiny() {
  static const Scenario sc = make_scenario({"tiny-2n4c", "rw50", std::nullopt, 16, 1, 20'000, 20'000});
  return sc;
}

void BM_Lru(benchmark::State& state) {
  LruCache cache(static_cast<std::size_t>(state.range(0)));
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(cache.access(uniform_index(rng, 4 * state.range(0))));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Lru)->Arg(16)->Arg(256);

void BM_IndexLookup(benchmark::State& state) {
  const auto spec = canned_workload("lookup100");
  const auto keys = key_space_for(spec);
  auto index = build_index(keys, 256);
  Rng rng(5);
  for (auto _ : state) {
    Query q;
    q.key = keys.keys[uniform_index(rng, keys.size())];
    benchmark::DoNotOptimize(index.execute(q).accesses.size());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_IndexLookup);

void BM_Simulate(benchmark::State& state) {
  const auto& sc = tiny();
  const auto policy = baseline_schedule("grouped", sc.topology, sc.index.slice_count());
  for (auto _ : state) benchmark::DoNotOptimize(simulate(sc.topology, sc.index, policy, sc.queries).snapshot.throughput);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sc.queries.size()));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_Tokenize(benchmark::State& state) {
  const auto& sc = tiny();
  const auto policy = baseline_schedule("spread", sc.topology, sc.index.slice_count());
  const auto t = run_simulation(sc.topology, sc.index, policy, sc.queries, {}, sc.context(1));
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(t, sc.topology).token_count());
}
BENCHMARK(BM_Tokenize);

}  // namespace

BENCHMARK_MAIN();
