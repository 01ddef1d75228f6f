#include <benchmark/benchmark.h>

#include <complex>

#include "icmr/wire/codec.hpp"

using namespace icmr;

namespace {

wire::KSpaceReadout make_readout(std::size_t samples, std::size_t coils) {
  wire::KSpaceReadout r;
  r.header.num_samples = static_cast<std::uint16_t>(samples);
  r.header.num_coils = static_cast<std::uint16_t>(coils);
  r.header.read_dir = {1, 0, 0};
  r.header.phase_dir = {0, 1, 0};
  r.header.slice_dir = {0, 0, 1};
  r.samples.assign(samples * coils, {0.5f, -0.25f});
  return r;
}

void BM_EncodeReadout(benchmark::State& state) {
  const auto r = make_readout(static_cast<std::size_t>(state.range(0)), 4);
  wire::Bytes out;
  for (auto _ : state) {
    out.clear();
    wire::encode_message_into(r, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(std::int64_t(state.iterations()) * std::int64_t(out.size()));
}
BENCHMARK(BM_EncodeReadout)->Arg(128)->Arg(256)->Arg(512);

void BM_DecodeStream(benchmark::State& state) {
  wire::Bytes stream;
  for (int i = 0; i < 256; ++i) wire::encode_message_into(make_readout(static_cast<std::size_t>(state.range(0)), 4), stream);
  for (auto _ : state) {
    wire::FrameDecoder decoder;
    decoder.feed(stream);
    std::size_t n = 0;
    while (decoder.next()) ++n;
    benchmark::DoNotOptimize(n);
  }
  state.SetBytesProcessed(std::int64_t(state.iterations()) * std::int64_t(stream.size()));
}
BENCHMARK(BM_DecodeStream)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
