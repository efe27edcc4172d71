#include <numeric>

#include <benchmark/benchmark.h>

#include "msbft/kernels.hpp"
#include "msbft/protocols.hpp"
#include "msbft/reliability.hpp"
#include "msbft/topology.hpp"

using namespace msbft;

static void BM_KernelA(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  std::vector<NodeId> ids(s);
  std::iota(ids.begin(), ids.end(), 0);
  const auto cfg = KernelConfig::for_participants(ids);
  std::vector<Value> inputs(s, 1);
  AdversarySpec adv;
  for (int k = 0; k < max_fault_bound(s); ++k) adv.corrupt.push_back(k);
  adv.default_strategy = {StrategyKind::kEquivocate, 0};
  for (auto _ : state) benchmark::DoNotOptimize(run_immediate_ba_As(cfg, inputs, adv));
}
BENCHMARK(BM_KernelA)->Arg(7)->Arg(16)->Arg(31);

static void BM_Broadcast(benchmark::State& state) {
  const auto h = build_hypercube(7, static_cast<int>(state.range(0)));
  AdversarySpec adv;
  adv.corrupt = {1, 5};
  adv.default_strategy = {StrategyKind::kRandom, 0};
  for (auto _ : state) benchmark::DoNotOptimize(multiscale_broadcast(h, 0, 1, adv));
}
BENCHMARK(BM_Broadcast)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_QExact(benchmark::State& state) {
  const int s = static_cast<int>(state.range(0));
  const Real p = to_real(1e-4);
  for (auto _ : state) benchmark::DoNotOptimize(q_exact(s / 3, s, p));
}
BENCHMARK(BM_QExact)->Arg(16)->Arg(256)->Arg(1024);

static void BM_ExpanderStack(benchmark::State& state) {
  ExpanderStackParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  p.base_size = 16;
  p.theta = {0.5};
  p.degree = {15, 24};
  for (std::size_t size = 32; size < p.n; size *= 2) {
    p.theta.push_back(0.5);
    p.degree.push_back(24);
  }
  std::uint64_t seed = 1;
  for (auto _ : state) {
    p.seed = seed++;
    benchmark::DoNotOptimize(build_expander_stack(p));
  }
}
BENCHMARK(BM_ExpanderStack)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
