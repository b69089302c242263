#include <benchmark/benchmark.h>

#include "clapping/comms/wire.hpp"
#include "clapping/compress/compressor.hpp"
#include "clapping/rng.hpp"

using namespace clapping;
using compress::CompressorSpec;

namespace {

compress::CompressedPayload payload(const CompressorSpec& spec, std::size_t d) {
  RngStream rng(3, "bench/wire");
  math::Vector x(d);
  for (auto& v : x) v = rng.normal(0.0, 1.0);
  return compress::compress(spec, x, rng);
}

void encode_bench(benchmark::State& state, const CompressorSpec& spec) {
  const auto p = payload(spec, static_cast<std::size_t>(state.range(0)));
  std::vector<std::uint8_t> out;
  for (auto _ : state) {
    out.clear();
    comms::encode_into(p.body, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void decode_bench(benchmark::State& state, const CompressorSpec& spec) {
  const auto p = payload(spec, static_cast<std::size_t>(state.range(0)));
  const auto bytes = comms::encode(p.body);
  const auto ctx = comms::context_for(p.body);
  for (auto _ : state) benchmark::DoNotOptimize(comms::reconstruct(comms::decode(bytes, ctx)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}

void BM_EncodeDense(benchmark::State& state) { encode_bench(state, CompressorSpec::identity()); }
void BM_EncodeSparse(benchmark::State& state) { encode_bench(state, CompressorSpec::topk(state.range(0) / 20)); }
void BM_EncodeQuant8(benchmark::State& state) { encode_bench(state, CompressorSpec::uniform_quant(8)); }
void BM_DecodeDense(benchmark::State& state) { decode_bench(state, CompressorSpec::identity()); }
void BM_DecodeSparse(benchmark::State& state) { decode_bench(state, CompressorSpec::topk(state.range(0) / 20)); }
void BM_DecodeQuant8(benchmark::State& state) { decode_bench(state, CompressorSpec::uniform_quant(8)); }

}  // namespace

BENCHMARK(BM_EncodeDense)->Arg(4096);
BENCHMARK(BM_EncodeSparse)->Arg(4096);
BENCHMARK(BM_EncodeQuant8)->Arg(4096);
BENCHMARK(BM_DecodeDense)->Arg(4096);
BENCHMARK(BM_DecodeSparse)->Arg(4096);
BENCHMARK(BM_DecodeQuant8)->Arg(4096);
