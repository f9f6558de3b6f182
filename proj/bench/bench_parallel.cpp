#include <benchmark/benchmark.h>

#include "chair/chair.hpp"
#include "chair/masking.hpp"
#include "test_support.hpp"

namespace {

const std::vector<chair::CaptionRecord>& corpus() {
  static const auto records = chair_test::coco_prediction_corpus(5000, 5000);
  return records;
}

void BM_score_reference(benchmark::State& state) {
  const auto& m = chair_test::coco_matcher();
  for (auto _ : state) benchmark::DoNotOptimize(chair::score_corpus_reference(corpus(), m));
  state.SetItemsProcessed(state.iterations() * corpus().size());
}

void BM_score_parallel(benchmark::State& state) {
  const auto& m = chair_test::coco_matcher();
  chair::ScoreOptions opt;
  opt.workers = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(chair::score_corpus(corpus(), m, opt));
  state.SetItemsProcessed(state.iterations() * corpus().size());
}

void BM_mask_reference(benchmark::State& state) {
  const auto& m = chair_test::coco_matcher();
  chair::MaskingConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(chair::mask_corpus_reference(corpus(), m, cfg));
}

void BM_mask_parallel(benchmark::State& state) {
  const auto& m = chair_test::coco_matcher();
  chair::MaskingConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(chair::mask_corpus(corpus(), m, cfg, static_cast<int>(state.range(0))));
  }
}

}  // namespace

BENCHMARK(BM_score_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_score_parallel)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mask_reference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mask_parallel)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
