#include <benchmark/benchmark.h>

#include <complex>
#include <vector>

#include "icmr/recon/recon.hpp"

using namespace icmr;

namespace {

void BM_CenteredIfft2(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::complex<float>> data(n * n, {1.0f, 0.0f});
  for (auto _ : state) {
    recon::centered_ifft2(data, n, n);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_CenteredIfft2)->Arg(64)->Arg(128)->Arg(192)->Arg(256);

// One SAX slice: 25 phases, 4 coils.
void BM_ReconBucket(benchmark::State& state) {
  const auto n = static_cast<std::uint16_t>(state.range(0));
  stages::KSpaceBucket bucket;
  std::uint32_t counter = 0;
  for (std::uint16_t phase = 0; phase < 25; ++phase) {
    for (std::uint16_t k = 0; k < n; ++k) {
      wire::KSpaceReadout r;
      r.header.num_samples = n;
      r.header.num_coils = 4;
      r.header.kline_idx = k;
      r.header.phase_idx = phase;
      r.header.scan_counter = counter++;
      r.samples.assign(std::size_t(n) * 4, {0.1f, 0.0f});
      bucket.readouts.push_back(std::move(r));
    }
  }
  recon::GeometryDefaults geometry;
  for (auto _ : state) {
    auto frames = recon::recon_bucket(bucket, geometry);
    benchmark::DoNotOptimize(frames.data());
  }
}
BENCHMARK(BM_ReconBucket)->Arg(128)->Arg(192)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
