#include <benchmark/benchmark.h>

#include "clapping/compress/compressor.hpp"
#include "clapping/rng.hpp"

using namespace clapping;
using compress::CompressorSpec;

namespace {

math::Vector gaussian(std::size_t d) {
  RngStream rng(1, "bench/input");
  math::Vector x(d);
  for (auto& v : x) v = rng.normal(0.0, 1.0);
  return x;
}

void run(benchmark::State& state, const CompressorSpec& spec) {
  const auto x = gaussian(static_cast<std::size_t>(state.range(0)));
  RngStream rng(2, "bench/compressor");
  for (auto _ : state) benchmark::DoNotOptimize(compress::compress(spec, x, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TopK(benchmark::State& state) { run(state, CompressorSpec::topk(state.range(0) / 20)); }
void BM_RandK(benchmark::State& state) { run(state, CompressorSpec::randk(state.range(0) / 20)); }
void BM_UniformQuant8(benchmark::State& state) { run(state, CompressorSpec::uniform_quant(8)); }
void BM_Natural(benchmark::State& state) { run(state, CompressorSpec::natural()); }
void BM_TopKThenQuant(benchmark::State& state) {
  run(state, CompressorSpec::compose({CompressorSpec::topk(state.range(0) / 20), CompressorSpec::uniform_quant(8)}));
}

}  // namespace

BENCHMARK(BM_TopK)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_RandK)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_UniformQuant8)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_Natural)->RangeMultiplier(4)->Range(256, 16384);
BENCHMARK(BM_TopKThenQuant)->RangeMultiplier(4)->Range(256, 16384);
