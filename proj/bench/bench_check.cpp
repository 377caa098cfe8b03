// Serial reference vs OpenMP kernels on generated histories.

#include <benchmark/benchmark.h>

#include <map>

#include "histcheck/check.hpp"
#include "histcheck/gen.hpp"

using namespace histcheck;

namespace {

const Observation& history(int txns) {
  static std::map<int, Observation> cache;
  auto it = cache.find(txns);
  if (it == cache.end()) {
    GenConfig cfg;
    cfg.txn_count = txns;
    cfg.seed = 7;
    SimMode mode;
    mode.injectors[Injector::g_single] = 0.01;
    mode.injectors[Injector::g2_write_skew] = 0.01;
    it = cache.emplace(txns, simulate(cfg, mode).obs).first;
  }
  return it->second;
}

void analyze_with(benchmark::State& state, Exec exec) {
  const Observation& obs = history(static_cast<int>(state.range(0)));
  CheckOptions opts;
  opts.consistency = Consistency::strict_serializable;
  opts.exec = exec;
  for (auto _ : state) benchmark::DoNotOptimize(analyze(obs, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AnalyzeSerial(benchmark::State& state) { analyze_with(state, Exec::serial); }
void BM_AnalyzeParallel(benchmark::State& state) { analyze_with(state, Exec::parallel); }

void cycles_with(benchmark::State& state, Exec exec) {
  CheckOptions opts;
  opts.consistency = Consistency::strict_serializable;
  const Analysis an = analyze(history(static_cast<int>(state.range(0))), opts);
  const auto classes = violation_set(Consistency::strict_serializable);
  const LabelSet order = order_labels_for(Consistency::strict_serializable, false);
  std::set<AnomalyClass> cycle_classes;
  for (AnomalyClass c : classes) {
    if (is_cycle_class(c)) cycle_classes.insert(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(find_cycles(an.graph, cycle_classes, order, exec));
}

void BM_CyclesSerial(benchmark::State& state) { cycles_with(state, Exec::serial); }
void BM_CyclesParallel(benchmark::State& state) { cycles_with(state, Exec::parallel); }

}  // namespace

BENCHMARK(BM_AnalyzeSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AnalyzeParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CyclesSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CyclesParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
