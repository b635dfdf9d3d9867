#include <benchmark/benchmark.h>

#include "rpg/algorithms.hpp"
#include "rpg/analysis.hpp"
#include "rpg/shaping.hpp"

namespace {

using namespace rpg;

void BM_TapeBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    Tape tape;
    std::vector<Value> leaves;
    for (int k = 0; k < 8; ++k) leaves.push_back(tape.leaf(0.1 * k + 0.05));
    Value acc = tape.constant(0.0);
    for (int k = 0; k < n; ++k) {
      Value term = leaves[k % 8] * leaves[(k + 3) % 8] + exp(leaves[(k + 5) % 8] * 0.01);
      acc += term;
    }
    auto grads = tape.backward(acc, leaves, false);
    benchmark::DoNotOptimize(grads.grads.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TapeBackward)->Arg(256)->Arg(4096);

void BM_NestedGradient(benchmark::State& state) {
  for (auto _ : state) {
    Tape tape;
    Value x = tape.leaf(1.3);
    Value y = x * x * x;
    auto g1 = tape.backward(y, std::vector<Value>{x}, true);
    auto g2 = tape.backward(g1.grads[0], std::vector<Value>{x}, true);
    auto g3 = tape.backward(g2.grads[0], std::vector<Value>{x}, false);
    benchmark::DoNotOptimize(g3.grads[0]);
  }
}
BENCHMARK(BM_NestedGradient);

void BM_ExactStep(benchmark::State& state) {
  const PayoffGame& game = *find_builtin("fig2_coop");
  AlgorithmSpec spec;
  spec.kind = AlgorithmKind::at_rpg;
  spec.seed = 1;
  ObjectiveGraph graph = build_graph(spec, 0.0);
  PolicySet policies = make_policies(graph, spec, game, 0.1);
  TrainConfig cfg;
  cfg.lookahead.lookahead_n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    PolicySet scratch = policies;
    StepMetrics m = exact_rpg_step(graph, game, scratch, cfg);
    benchmark::DoNotOptimize(m.agents.data());
  }
}
BENCHMARK(BM_ExactStep)->Arg(1)->Arg(8)->Arg(48);

void BM_SampledStep(benchmark::State& state) {
  const PayoffGame& game = *find_builtin("fig2_coop");
  AlgorithmSpec spec;
  spec.kind = AlgorithmKind::at_rpg;
  spec.seed = 1;
  ObjectiveGraph graph = build_graph(spec, 0.0);
  PolicySet policies = make_policies(graph, spec, game, 0.1);
  TrainConfig cfg;
  cfg.lookahead.lookahead_n = 4;
  cfg.batch_size = static_cast<int>(state.range(0));
  uint64_t step = 0;
  for (auto _ : state) {
    PolicySet scratch = policies;
    CriticSet critics;
    StepMetrics m = rpg_step(graph, game, scratch, critics, cfg, Rng::seeded(1).fork(step++));
    benchmark::DoNotOptimize(m.agents.data());
  }
}
BENCHMARK(BM_SampledStep)->Arg(32)->Arg(128);

void BM_RationalityCheck(benchmark::State& state) {
  const PayoffGame& game = *find_builtin("appB_sabotage");
  const std::vector<double> strategy{0.1, 0.3, 0.2, 0.4};
  for (auto _ : state) {
    RationalityReport r = rationality_check(game, strategy, 2, 0.01);
    benchmark::DoNotOptimize(r.rational);
  }
}
BENCHMARK(BM_RationalityCheck);

}  // namespace

BENCHMARK_MAIN();
