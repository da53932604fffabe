#include <benchmark/benchmark.h>

#include <random>

#include "qute/experiment.hpp"
#include "qute/graph.hpp"
#include "qute/multiple_testing.hpp"
#include "qute/protocol.hpp"

namespace {

using namespace qute;

PValueMap random_pvalues(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PValueMap out;
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace(static_cast<HypothesisId>(i), PValue(u(rng) < 0.3 ? 0.01 * u(rng) : u(rng)));
  }
  return out;
}

void BM_bh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto p = random_pvalues(n, 1);
  const TestLevel level(0.2, n);
  for (auto _ : state) benchmark::DoNotOptimize(bh(p, level));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_bh)->RangeMultiplier(4)->Range(16, 16384)->Complexity();

void BM_quantized_bh(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const TestLevel level(0.2, n);
  PRankMap ranks;
  for (const auto& [id, p] : random_pvalues(n, 2)) ranks.emplace(id, prank_quantize(p, level));
  for (auto _ : state) benchmark::DoNotOptimize(quantized_bh(ranks, level));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_quantized_bh)->RangeMultiplier(4)->Range(16, 16384)->Complexity();

/// Args: node count, edge probability in percent, rounds, quantized.
void BM_run_qute(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Graph g = erdos_renyi(n, static_cast<double>(state.range(1)) / 100.0, 3);
  const auto table = sample_pvalues(GaussianModel{}, n, 4).table;
  ProtocolConfig config;
  config.rounds = static_cast<std::size_t>(state.range(2));
  config.quantized = state.range(3) != 0;
  config.record_messages = false;
  std::uint64_t bits = 0;
  for (auto _ : state) {
    const auto out = run_qute(GraphSchedule(g), table, config);
    bits = out.transcript.delivered_bits;
    benchmark::DoNotOptimize(out.rejected);
  }
  state.counters["bits"] = static_cast<double>(bits);
}
BENCHMARK(BM_run_qute)
    ->ArgsProduct({{200, 1000}, {1, 10, 50}, {1, 2}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_closed_form(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Graph g = erdos_renyi(n, static_cast<double>(state.range(1)) / 100.0, 3);
  const auto table = sample_pvalues(GaussianModel{}, n, 4).table;
  for (auto _ : state) benchmark::DoNotOptimize(qute_closed_form(g, table, 0.2, 1));
}
BENCHMARK(BM_closed_form)->ArgsProduct({{200, 1000}, {1, 10, 50}})->Unit(benchmark::kMillisecond);

void BM_grid_rounds(benchmark::State& state) {
  const Graph g = grid(16, 16);
  const auto table = sample_pvalues(GaussianModel{}, g.node_count(), 5).table;
  ProtocolConfig config;
  config.rounds = static_cast<std::size_t>(state.range(0));
  config.record_messages = false;
  for (auto _ : state) benchmark::DoNotOptimize(run_qute(GraphSchedule(g), table, config).rejected);
}
BENCHMARK(BM_grid_rounds)->DenseRange(0, 16, 4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
