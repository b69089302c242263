#include <benchmark/benchmark.h>

#include <memory>
#include <string>

#include "clapping/engine/engine.hpp"
#include "clapping/harness/dataset.hpp"


using namespace clapping;
using compress::CompressorSpec;
using engine::Variant;

namespace {

// One training step of a 4-worker tanh MLP with Top-K on every boundary.
void BM_EngineStep(benchmark::State& state) {
  const auto variant = static_cast<Variant>(state.range(0));
  harness::MLPDatasetSpec ds;
  ds.n = 2048;
  ds.dim = 64;
  ds.hidden = {128, 128, 128};
  const auto chain = harness::mlp_chain(ds.dim, ds.hidden, 4);
  auto data = std::make_shared<engine::InMemoryDataset>(harness::fold_labels(harness::gen_mlp_dataset(ds), false));
  RngStream rng(4, "bench/init");
  engine::AlgoConfig c;
  c.variant = variant;
  c.batch_size = variant == Variant::AQSGD ? 1 : 32;
  c.sampling_rule = variant == Variant::AQSGD ? engine::SamplingRule::SingleSample : engine::SamplingRule::BatchSampleWise;
  c.resample_p = engine::Schedule(0.5);
  c.compressors.assign(chain.num_boundaries(), {CompressorSpec::topk(16), CompressorSpec::topk(16)});
  engine::PipelineEngine eng(chain, c, data, math::random_params(chain, rng, 0.2));
  for (auto _ : state) benchmark::DoNotOptimize(eng.run_iteration());
  state.SetLabel(std::string(engine::to_string(variant)));
}

}  // namespace

BENCHMARK(BM_EngineStep)->DenseRange(0, 5);
