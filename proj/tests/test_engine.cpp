#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <memory>

#include "clapping/engine/engine.hpp"
#include "clapping/error.hpp"
#include "clapping/harness/dataset.hpp"

using namespace clapping;
using namespace clapping::engine;
using compress::CompressorSpec;
using Side = PipelineEngine::Side;

namespace {

struct Fixture {
  math::ModelChain chain;
  std::shared_ptr<InMemoryDataset> data;
  math::ParamSet init;
};

Fixture mlp_fixture(std::size_t n = 64, std::size_t workers = 3, std::uint64_t seed = 5) {
  harness::MLPDatasetSpec ds;
  ds.n = n;
  ds.dim = 5;
  ds.hidden = {6, 6};
  ds.seed = seed;
  Fixture f;
  f.chain = harness::mlp_chain(ds.dim, ds.hidden, workers);
  f.data = std::make_shared<InMemoryDataset>(harness::fold_labels(harness::gen_mlp_dataset(ds), false));
  RngStream rng(seed, "init");
  f.init = math::random_params(f.chain, rng, 0.4);
  return f;
}

AlgoConfig base_config(Variant v, std::size_t batch = 1) {
  AlgoConfig c;
  c.variant = v;
  c.batch_size = batch;
  c.sampling_rule = batch == 1 ? SamplingRule::SingleSample : SamplingRule::BatchBatchWise;
  c.optimizer.lr = Schedule(0.05);
  c.optimizer.momentum = Schedule(0.5);
  c.seed = 9;
  return c;
}

void set_compressor(AlgoConfig& c, const CompressorSpec& fwd, const CompressorSpec& bwd) {
  c.compressors.assign(1, BoundaryCompressors{fwd, bwd});
}

bool bit_equal(math::ConstView a, math::ConstView b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double max_param_diff(const math::ParamSet& a, const math::ParamSet& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, math::max_abs_difference(a[i], b[i]));
  return m;
}

}  // namespace

TEST(Engine, NoCompStepEqualsMonolithicMomentumStep) {
  RngStream rng(1, "mono");
  const auto chain = harness::logistic_chain(4, 0.005);
  math::Batch rows(3, 5);
  for (auto& v : rows.data()) v = rng.normal(0, 1);
  auto data = std::make_shared<InMemoryDataset>(rows);
  const auto init = math::random_params(chain, rng, 0.5);
  PipelineEngine eng(chain, base_config(Variant::NoComp), data, init);
  eng.step_on({2}, {1});
  const auto g = math::chain_backprop(chain, rows.row(2), init);
  for (std::size_t s = 0; s < chain.stages.size(); ++s)
    for (std::size_t i = 0; i < init[s].size(); ++i)
      EXPECT_NEAR(eng.params()[s][i], init[s][i] - 0.05 * 0.5 * g.weight[s][i], 1e-15);
}

TEST(Engine, BatchGradientIsScaledByOneOverB) {
  RngStream rng(2, "batch");
  const auto chain = harness::logistic_chain(3, 0.005);
  math::Batch rows(4, 4);
  for (auto& v : rows.data()) v = rng.normal(0, 1);
  auto data = std::make_shared<InMemoryDataset>(rows);
  const auto init = math::random_params(chain, rng, 0.5);
  auto cfg = base_config(Variant::NoComp, 3);
  cfg.optimizer.momentum = Schedule(1.0);
  PipelineEngine eng(chain, cfg, data, init);
  eng.step_on({0, 3, 1}, {1, 1, 1});
  math::Vector mean(init[0].size(), 0.0);
  for (std::uint64_t id : {0, 3, 1}) {
    const auto g = math::chain_backprop(chain, rows.row(id), init);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g.weight[0][i] / 3.0;
  }
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(eng.params()[0][i], init[0][i] - 0.05 * mean[i], 1e-15);
}

TEST(Engine, IdentityCompressorsCollapseToNoComp) {
  const auto f = mlp_fixture();
  PipelineEngine ref(f.chain, base_config(Variant::NoComp), f.data, f.init);
  std::vector<std::unique_ptr<PipelineEngine>> runs;
  for (auto v : {Variant::ClappingFC, Variant::ClappingFU, Variant::Direct, Variant::ForwardEFOnly}) {
    auto c = base_config(v);
    c.resample_p = Schedule(1.0);
    runs.push_back(std::make_unique<PipelineEngine>(f.chain, c, f.data, f.init));
  }
  for (int t = 0; t < 1000; ++t) {
    ref.run_iteration();
    for (auto& r : runs) r->run_iteration();
  }
  for (auto& r : runs) EXPECT_LE(max_param_diff(r->params(), ref.params()), 1e-12) << to_string(r->config().variant);
}

TEST(Engine, FreshRowsUnderFUCrossDense) {
  const auto f = mlp_fixture();
  auto c = base_config(Variant::ClappingFU, 4);
  c.sampling_rule = SamplingRule::BatchSampleWise;
  c.resample_p = Schedule(0.5);
  set_compressor(c, CompressorSpec::topk(2), CompressorSpec::topk(2));
  PipelineEngine eng(f.chain, c, f.data, f.init);
  const std::size_t d = f.chain.boundary_dim(0);
  for (int t = 0; t < 50; ++t) {
    const auto m = eng.run_iteration();
    const auto& fresh = eng.sampler().fresh;
    for (std::size_t r = 0; r < 4; ++r) {
      if (!fresh[r]) continue;
      for (std::size_t b = 0; b < f.chain.num_boundaries(); ++b) {
        EXPECT_TRUE(bit_equal(eng.activation_cache(b, Side::Receiver).row(r), eng.computed_activation(b).row(r)));
        EXPECT_TRUE(bit_equal(eng.gradient_cache(b, Side::Receiver).row(r), eng.computed_gradient(b).row(r)));
      }
    }
    if (m.fresh_rows == 4) {
      EXPECT_EQ(m.fwd_bytes, 4u * 4u * d * f.chain.num_boundaries());
      EXPECT_EQ(m.bwd_bytes, m.fwd_bytes);
    }
    if (m.fresh_rows == 0) EXPECT_EQ(m.fwd_bytes, 4u * 16u * f.chain.num_boundaries());
  }
}

TEST(Engine, FirstStepOfFUIsDense) {
  const auto f = mlp_fixture();
  auto c = base_config(Variant::ClappingFU);
  c.resample_p = Schedule(0.0);
  set_compressor(c, CompressorSpec::topk(1), CompressorSpec::topk(1));
  PipelineEngine eng(f.chain, c, f.data, f.init);
  const auto m1 = eng.run_iteration();
  EXPECT_TRUE(m1.f_fu);
  EXPECT_EQ(m1.fwd_bytes, 4u * 6u * 2u);
  const auto m2 = eng.run_iteration();
  EXPECT_FALSE(m2.f_fu);
  EXPECT_EQ(m2.fwd_bytes, 8u * 2u);
}

TEST(Engine, CachesStayMirrored) {
  const auto f = mlp_fixture();
  for (auto v : {Variant::ClappingFC, Variant::ClappingFU, Variant::Direct, Variant::ForwardEFOnly, Variant::AQSGD}) {
    auto c = base_config(v);
    c.resample_p = Schedule(0.3);
    set_compressor(c, CompressorSpec::randk(2), CompressorSpec::uniform_quant(4));
    PipelineEngine eng(f.chain, c, f.data, f.init);
    for (int t = 0; t < 100; ++t) {
      eng.run_iteration();
      for (std::size_t b = 0; b < f.chain.num_boundaries(); ++b) {
        ASSERT_TRUE(bit_equal(eng.activation_cache(b, Side::Sender).data(),
                              eng.activation_cache(b, Side::Receiver).data()));
        ASSERT_TRUE(bit_equal(eng.gradient_cache(b, Side::Sender).data(),
                              eng.gradient_cache(b, Side::Receiver).data()));
      }
    }
  }
}

TEST(Engine, RunsAreDeterministic) {
  const auto f = mlp_fixture();
  auto c = base_config(Variant::ClappingFC, 4);
  c.sampling_rule = SamplingRule::BatchSampleWise;
  c.resample_p = Schedule(0.4);
  set_compressor(c, CompressorSpec::randk(3), CompressorSpec::randk(3));
  PipelineEngine a(f.chain, c, f.data, f.init), b(f.chain, c, f.data, f.init);
  for (int t = 0; t < 200; ++t) {
    const auto ma = a.run_iteration();
    const auto mb = b.run_iteration();
    ASSERT_EQ(ma.loss, mb.loss);
    ASSERT_EQ(ma.grad_norm, mb.grad_norm);
    ASSERT_EQ(ma.fwd_bytes, mb.fwd_bytes);
  }
  EXPECT_EQ(max_param_diff(a.params(), b.params()), 0.0);
}

TEST(Engine, CompressorStreamDoesNotPerturbSampling) {
  const auto f = mlp_fixture();
  auto c1 = base_config(Variant::ClappingFC);
  c1.resample_p = Schedule(0.5);
  auto c2 = c1;
  set_compressor(c1, CompressorSpec::randk(2), CompressorSpec::randk(2));
  set_compressor(c2, CompressorSpec::topk(2), CompressorSpec::identity());
  PipelineEngine a(f.chain, c1, f.data, f.init), b(f.chain, c2, f.data, f.init);
  for (int t = 0; t < 100; ++t) {
    a.run_iteration();
    b.run_iteration();
    ASSERT_EQ(a.sampler().current, b.sampler().current);
  }
}

TEST(Exchange, DirectTopOneNeverDecays) {
  const math::Vector y{1.0, 1.0};
  math::Vector s(2, 0.0), r(2, 0.0);
  compress::CompressedPayload scratch;
  for (int t = 0; t < 5; ++t) {
    exchange_row(ExchangeMode::Direct, CompressorSpec::topk(1), y, s, r, nullptr, scratch);
    EXPECT_EQ(r, (math::Vector{1.0, 0.0}));
  }
}

TEST(Exchange, ErrorFeedbackContractsOnFrozenTarget) {
  RngStream rng(3, "ef");
  math::Vector y(10);
  for (auto& v : y) v = rng.normal(0, 1);
  math::Vector s(10, 0.0), r(10, 0.0);
  compress::CompressedPayload scratch;
  const double omega = std::sqrt(compress::contraction_bound(CompressorSpec::topk(3), 10));
  double prev = math::norm(y);
  for (int t = 0; t < 4; ++t) {
    exchange_row(ExchangeMode::ErrorFeedback, CompressorSpec::topk(3), y, s, r, nullptr, scratch);
    const double err = std::sqrt(math::squared_distance(r, y));
    EXPECT_LE(err, omega * prev + 1e-12);
    prev = err;
  }
  EXPECT_EQ(prev, 0.0);  // ⌈10/3⌉ = 4 steps
}

TEST(Exchange, BackwardInjectedErrorPropagatesLinearly) {
  // x → W₁ (3→2) | W₂ (2→1). With ṽ₁ = W₂ᵀ·1 + ε, worker 1 steps along ṽ₁xᵀ.
  math::ModelChain chain{{math::StageSpec::linear(3, 2), math::StageSpec::linear(2, 1)}, {1}};
  math::Batch rows(1, 3);
  rows.data() = {0.5, -1.0, 2.0};
  auto data = std::make_shared<InMemoryDataset>(rows);
  const math::ParamSet init{{1.0, 0.5, -0.3, 0.2, -1.1, 0.7}, {0.8, -1.5}};
  auto c = base_config(Variant::Direct);
  c.optimizer.momentum = Schedule(1.0);
  c.optimizer.lr = Schedule(1.0);
  set_compressor(c, CompressorSpec::identity(), CompressorSpec::inject_uniform(0.3));
  PipelineEngine eng(chain, c, data, init);
  eng.step_on({0}, {1});

  RngStream replay(c.seed, "compressor/b0/bwd");
  const double e0 = replay.uniform(-0.3, 0.3), e1 = replay.uniform(-0.3, 0.3);
  const math::Vector v_tilde{0.8 + e0, -1.5 + e1};
  EXPECT_EQ(eng.computed_gradient(0).row(0)[0], 0.8);
  EXPECT_EQ(eng.computed_gradient(0).row(0)[1], -1.5);
  EXPECT_NEAR(eng.gradient_cache(0, Side::Receiver).row(0)[0], v_tilde[0], 1e-15);
  EXPECT_NEAR(eng.gradient_cache(0, Side::Receiver).row(0)[1], v_tilde[1], 1e-15);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_NEAR(eng.params()[0][i * 3 + j], init[0][i * 3 + j] - v_tilde[i] * rows.row(0)[j], 1e-15);
}

TEST(Engine, MomentumResetClearsState) {
  const auto f = mlp_fixture();
  auto c = base_config(Variant::NoComp);
  c.momentum_reset_steps = {3};
  c.optimizer.momentum = Schedule(0.1);
  PipelineEngine eng(f.chain, c, f.data, f.init);
  eng.run_iteration();
  eng.run_iteration();
  const auto before = eng.momentum_state();
  const auto w_before = eng.params();
  eng.run_iteration();
  // After a reset ũ = m·g, so w moved by exactly lr·ũ.
  for (std::size_t s = 0; s < before.size(); ++s)
    for (std::size_t i = 0; i < before[s].size(); ++i)
      EXPECT_NEAR(w_before[s][i] - eng.params()[s][i], 0.05 * eng.momentum_state()[s][i], 1e-15);
}

TEST(AQSGD, CacheHoldsOneEntryPerSample) {
  const auto f = mlp_fixture(64);
  PipelineEngine aq(f.chain, base_config(Variant::AQSGD), f.data, f.init);
  PipelineEngine fc(f.chain, base_config(Variant::ClappingFC), f.data, f.init);
  for (std::size_t b = 0; b < f.chain.num_boundaries(); ++b) {
    EXPECT_EQ(aq.cache_entries(b), 64u);
    EXPECT_EQ(fc.cache_entries(b), 1u);
  }
  PipelineEngine aq4(f.chain, base_config(Variant::AQSGD, 4), f.data, f.init);
  PipelineEngine fc4(f.chain, base_config(Variant::ClappingFC, 4), f.data, f.init);
  EXPECT_EQ(aq4.cache_entries(0), 64u);
  EXPECT_EQ(fc4.cache_entries(0), 4u);
}

TEST(AQSGD, StepTouchesOnlyTheSelectedEntry) {
  const auto f = mlp_fixture(8);
  auto c = base_config(Variant::AQSGD);
  set_compressor(c, CompressorSpec::topk(2), CompressorSpec::topk(2));
  PipelineEngine eng(f.chain, c, f.data, f.init);
  eng.aqsgd_step(3);
  for (std::uint64_t id = 0; id < 8; ++id) {
    const auto row = eng.aqsgd_cache(0, id, Side::Receiver);
    const bool zero = std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; });
    EXPECT_EQ(zero, id != 3) << id;
  }
  const math::Vector snapshot(eng.aqsgd_cache(0, 3, Side::Receiver).begin(), eng.aqsgd_cache(0, 3, Side::Receiver).end());
  eng.aqsgd_step(5);
  EXPECT_TRUE(bit_equal(eng.aqsgd_cache(0, 3, Side::Receiver), snapshot));
}

TEST(AQSGD, TwoEpochsWithIdentityMatchNoComp) {
  const auto f = mlp_fixture(4);
  auto c = base_config(Variant::AQSGD);
  c.sample_order = SampleOrder::EpochShuffle;
  auto r = c;
  r.variant = Variant::NoComp;
  PipelineEngine aq(f.chain, c, f.data, f.init), ref(f.chain, r, f.data, f.init);
  for (int t = 0; t < 8; ++t) {
    aq.run_iteration();
    ref.run_iteration();
  }
  EXPECT_LE(max_param_diff(aq.params(), ref.params()), 1e-12);
}

TEST(AQSGD, SingleSampleMatchesLazyFC) {
  const auto f = mlp_fixture(1);
  auto a = base_config(Variant::AQSGD);
  set_compressor(a, CompressorSpec::topk(2), CompressorSpec::topk(2));
  auto fc = a;
  fc.variant = Variant::ClappingFC;
  fc.resample_p = Schedule(0.0);
  // Backward compression differs (direct versus EF); keep it exact.
  a.compressors[0].backward = fc.compressors[0].backward = CompressorSpec::identity();
  PipelineEngine x(f.chain, a, f.data, f.init), y(f.chain, fc, f.data, f.init);
  for (int t = 0; t < 50; ++t) {
    x.run_iteration();
    y.run_iteration();
  }
  EXPECT_LE(max_param_diff(x.params(), y.params()), 1e-12);
}

TEST(AQSGD, UnboundedStreamIsUnsupported) {
  const auto f = mlp_fixture();
  auto stream = std::make_shared<StreamSource>(5, [](std::uint64_t, math::MutView out) {
    std::fill(out.begin(), out.end(), 0.1);
  });
  EXPECT_THROW(PipelineEngine(f.chain, base_config(Variant::AQSGD), stream, f.init), UnsupportedError);
  EXPECT_NO_THROW(PipelineEngine(f.chain, base_config(Variant::ClappingFC), stream, f.init));
}

TEST(EngineConfig, ValidatesCompressorAgainstBoundary) {
  const auto f = mlp_fixture();
  auto c = base_config(Variant::ClappingFC);
  set_compressor(c, CompressorSpec::topk(7), CompressorSpec::identity());
  try {
    PipelineEngine(f.chain, c, f.data, f.init);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "compress.b0.forward");
  }
}

TEST(EngineConfig, VariantNames) {
  for (auto v : {Variant::NoComp, Variant::Direct, Variant::ForwardEFOnly, Variant::AQSGD, Variant::ClappingFC,
                 Variant::ClappingFU})
    EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("clapping"), ConfigError);
  EXPECT_TRUE(uses_lazy_sampling(Variant::ClappingFU));
  EXPECT_FALSE(uses_lazy_sampling(Variant::AQSGD));
}
