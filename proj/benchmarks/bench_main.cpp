// Hot paths: world scoring, single-atom deltas, Gibbs sweeps and gradient
// accumulation on Smokers-sized and Nations-sized domains.

#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include <nmln/gibbs.hpp>
#include <nmln/potential.hpp>
#include <nmln/rng.hpp>

namespace {

using namespace nmln;

SignaturePtr signature(int n, int binary) {
  std::vector<std::string> constants;
  for (int i = 0; i < n; ++i) constants.push_back("c" + std::to_string(i));
  std::vector<Predicate> predicates{{"p", 1}};
  for (int b = 0; b < binary; ++b) predicates.push_back({"r" + std::to_string(b), 2});
  return std::make_shared<const Signature>(std::move(constants), std::move(predicates));
}

World sparse_world(const SignaturePtr& sig, double density, std::uint64_t seed) {
  Rng rng(seed);
  World w(sig);
  for (AtomIndex a = 0; a < w.size(); ++a) w.set(a, uniform01(rng) < density);
  return w;
}

PotentialModel model(const Signature& sig, int k) {
  ModelSpec spec;
  spec.k = k;
  spec.hidden = {30};
  spec.hidden_activation = Activation::sigmoid;
  return make_model(sig, spec, 1);
}

// Args: constants, fragment size.
void BM_WorldScore(benchmark::State& state) {
  const auto sig = signature(static_cast<int>(state.range(0)), 1);
  const auto m = model(*sig, static_cast<int>(state.range(1)));
  const World w = sparse_world(sig, 0.1, 2);
  Scorer scorer(m, sig);
  for (auto _ : state) benchmark::DoNotOptimize(scorer.world_score(w));
}
BENCHMARK(BM_WorldScore)->Args({8, 2})->Args({8, 3})->Args({14, 3});

void BM_ScoreDelta(benchmark::State& state) {
  const auto sig = signature(static_cast<int>(state.range(0)), 2);
  const auto m = model(*sig, static_cast<int>(state.range(1)));
  World w = sparse_world(sig, 0.1, 3);
  Scorer scorer(m, sig);
  AtomIndex a = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scorer.score_delta(w, a));
    a = (a + 7) % w.size();
  }
}
BENCHMARK(BM_ScoreDelta)->Args({14, 2})->Args({14, 3});

void BM_SequentialSweep(benchmark::State& state) {
  const auto sig = signature(static_cast<int>(state.range(0)), 1);
  const auto m = model(*sig, static_cast<int>(state.range(1)));
  GibbsSampler sampler(m, sig, 1);
  ChainState chain{sparse_world(sig, 0.1, 4), 5, 0};
  for (auto _ : state) sampler.sweep_sequential(chain);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sig->num_atoms()));
}
BENCHMARK(BM_SequentialSweep)->Args({8, 3})->Args({14, 3})->Unit(benchmark::kMillisecond);

// Args: constants, fragment size, threads.
void BM_BlockedSweep(benchmark::State& state) {
  const auto sig = signature(static_cast<int>(state.range(0)), 1);
  const auto m = model(*sig, static_cast<int>(state.range(1)));
  GibbsSampler sampler(m, sig, static_cast<int>(state.range(2)));
  const auto schedule = build_schedule(*sig, m.k);
  ChainState chain{sparse_world(sig, 0.1, 6), 7, 0};
  for (auto _ : state) sampler.sweep_blocked(chain, schedule);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sig->num_atoms()));
}
BENCHMARK(BM_BlockedSweep)->Args({14, 3, 1})->Args({14, 3, 2})->Unit(benchmark::kMillisecond);

void BM_GradientAccumulate(benchmark::State& state) {
  const auto sig = signature(static_cast<int>(state.range(0)), 1);
  const auto m = model(*sig, static_cast<int>(state.range(1)));
  std::vector<World> worlds;
  for (int i = 0; i < 10; ++i) worlds.push_back(sparse_world(sig, 0.1, 10 + i));
  for (auto _ : state) {
    GradientAccumulator acc(m, sig);
    for (const auto& w : worlds) acc.add_world(w, 0.1);
    benchmark::DoNotOptimize(acc.gradient());
  }
}
BENCHMARK(BM_GradientAccumulate)->Args({8, 3})->Args({14, 3})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
