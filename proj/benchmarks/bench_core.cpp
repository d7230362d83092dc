#include <benchmark/benchmark.h>

#include <random>

#include "asif/comparison.hpp"
#include "asif/mechanisms.hpp"
#include "asif/randomization_test.hpp"
#include "asif/rng.hpp"
#include "asif/synth.hpp"

namespace {

const asif::Dataset& desk_data() {
  static const auto g =
      asif::synth::generate(*asif::synth::scenario("confounded-exposure", 13011, 12, 8));
  return g.data;
}

void BM_DrawComplete(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto rng = asif::Rng::for_draw(1, 1, i++);
    benchmark::DoNotOptimize(asif::draw_complete(n, n / 2, rng));
  }
}
BENCHMARK(BM_DrawComplete)->Arg(200)->Arg(2000)->Arg(13011);

void BM_DrawBernoulli(benchmark::State& state) {
  const std::vector<double> p(13011, 0.3);
  std::uint64_t i = 0;
  for (auto _ : state) {
    auto rng = asif::Rng::for_draw(1, 2, i++);
    benchmark::DoNotOptimize(asif::draw_bernoulli(p, rng));
  }
}
BENCHMARK(BM_DrawBernoulli);

void BM_Evaluate(benchmark::State& state) {
  const auto& data = desk_data();
  const auto kind = static_cast<asif::StatisticKind>(state.range(0));
  const asif::StatisticEvaluator eval(data, asif::Target::instrument, kind);
  auto rng = asif::Rng::for_draw(3, 3, 0);
  const auto z = asif::draw_complete(data.n_units(), data.instrument().n_treated(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(eval(z));
  state.SetLabel(std::string(asif::to_string(kind)));
}
BENCHMARK(BM_Evaluate)
    ->Arg(static_cast<int>(asif::StatisticKind::scmd))
    ->Arg(static_cast<int>(asif::StatisticKind::iv_bias))
    ->Arg(static_cast<int>(asif::StatisticKind::sqrt_mahalanobis));

void BM_RunTest(benchmark::State& state) {
  const auto& data = desk_data();
  asif::TestConfig cfg;
  cfg.n_draws = 1000;
  cfg.statistic = asif::StatisticKind::sqrt_mahalanobis;
  const asif::CompleteMechanism cr{data.n_units(), data.instrument().n_treated()};
  for (auto _ : state) {
    benchmark::DoNotOptimize(asif::run_test(data, asif::Target::instrument, cr, cfg));
  }
}
BENCHMARK(BM_RunTest)->Unit(benchmark::kMillisecond);

void BM_CompareMechanisms(benchmark::State& state) {
  const auto& data = desk_data();
  asif::ComparisonConfig cfg;
  cfg.n_draws = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(asif::compare_mechanisms(data, cfg));
}
BENCHMARK(BM_CompareMechanisms)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
