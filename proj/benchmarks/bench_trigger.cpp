#include <benchmark/benchmark.h>

#include <vector>

#include "icmr/stages/stages.hpp"

using namespace icmr;

namespace {

void BM_SliceTrigger(benchmark::State& state) {
  std::vector<wire::KSpaceReadout> stream;
  for (std::uint16_t slice = 0; slice < 11; ++slice) {
    for (std::uint16_t k = 0; k < 256; ++k) {
      wire::KSpaceReadout r;
      r.header.slice_idx = slice;
      r.header.kline_idx = k;
      r.header.num_samples = 1;
      r.header.num_coils = 1;
      r.samples = {{1.0f, 0.0f}};
      stream.push_back(r);
    }
  }
  for (auto _ : state) {
    stages::KSpaceTrigger trigger(stages::TriggerDimension::kSlice);
    std::size_t buckets = 0;
    for (const auto& r : stream) buckets += trigger.ingest(r).has_value();
    buckets += trigger.end_of_stream().has_value();
    benchmark::DoNotOptimize(buckets);
  }
  state.SetItemsProcessed(std::int64_t(state.iterations()) * std::int64_t(stream.size()));
}
BENCHMARK(BM_SliceTrigger);

}  // namespace

BENCHMARK_MAIN();
