#include <benchmark/benchmark.h>

#include "usar/attribute_classifier.hpp"
#include "usar/evaluation.hpp"
#include "usar/rank_learner.hpp"
#include "usar/retrieval.hpp"
#include "usar/synthetic.hpp"
#include "usar/usad.hpp"

namespace {

using namespace usar;

Catalog corpus(std::size_t n) {
  SyntheticSpec spec;
  spec.n_items = n;
  spec.seed = 3;
  return generate_synthetic(spec);
}

const AttributeModelBank& toy_bank() {
  static const AttributeModelBank bank = [] {
    UsarConfig cfg;
    cfg.tradeoff_c = kDefaultBankTradeoffC;
    return train_bank(toy_corpus(), cfg);
  }();
  return bank;
}

void BM_Retrieve(benchmark::State& state) {
  const auto cat = corpus(static_cast<std::size_t>(state.range(0)));
  std::vector<ItemId> favorites;
  for (std::size_t i = 0; i < 5; ++i) favorites.push_back(cat.item(i * 3).id);
  UsarConfig cfg;
  for (auto _ : state) {
    const auto results = retrieve_neighbors(cat, favorites, cfg);
    benchmark::DoNotOptimize(build_training_pool(results, favorites));
  }
}
BENCHMARK(BM_Retrieve)->Arg(240)->Arg(2000)->Arg(10000);

void BM_TrainRankSvm(benchmark::State& state) {
  const auto cat = corpus(400);
  std::vector<ItemId> order;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) order.push_back(cat.item(i).id);
  const auto pairs = derive_pairs(order, 0);
  UsarConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(train(cat, pairs, cfg));
  state.counters["pairs"] = static_cast<double>(pairs.size());
}
BENCHMARK(BM_TrainRankSvm)->Arg(10)->Arg(30)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_TrainBank(benchmark::State& state) {
  const auto cat = toy_corpus();
  UsarConfig cfg;
  cfg.tradeoff_c = kDefaultBankTradeoffC;
  for (auto _ : state) benchmark::DoNotOptimize(train_bank(cat, cfg));
}
BENCHMARK(BM_TrainBank)->Unit(benchmark::kMillisecond);

void BM_Classify(benchmark::State& state) {
  const auto cat = toy_corpus();
  const auto& bank = toy_bank();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(classify(bank, cat.features(i)));
    i = (i + 1) % cat.size();
  }
}
BENCHMARK(BM_Classify);

void BM_SimulateSession(benchmark::State& state) {
  const auto cat = toy_corpus();
  const auto& bank = toy_bank();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    UsarConfig cfg;
    cfg.rng_seed = ++seed;
    benchmark::DoNotOptimize(simulate_session(cat, bank, cfg, sample_user(cat, seed)));
  }
}
BENCHMARK(BM_SimulateSession)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
