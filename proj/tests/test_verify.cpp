#include <gtest/gtest.h>

#include <memory>

#include <nlohmann/json.hpp>

#include "clapping/harness/dataset.hpp"
#include "clapping/verify/checks.hpp"

using namespace clapping;
using namespace clapping::verify;
using compress::CompressorSpec;

namespace {

EquivalenceSetup logistic_setup() {
  harness::LogisticDatasetSpec ds;
  ds.n = 200;
  ds.dim = 8;
  EquivalenceSetup s;
  s.chain = harness::logistic_chain(ds.dim, 0.005);
  s.data = std::make_shared<engine::InMemoryDataset>(harness::fold_labels(harness::gen_logistic_dataset(ds), true));
  s.initial_params = math::zero_params(s.chain);
  s.base.batch_size = 4;
  s.base.sampling_rule = engine::SamplingRule::BatchBatchWise;
  s.base.optimizer.lr = engine::Schedule(0.1);
  s.base.optimizer.momentum = engine::Schedule(0.1);
  return s;
}

}  // namespace

TEST(Verify, LinearChainGradientsAtRoundingLevel) {
  math::ModelChain c{{math::StageSpec::linear(4, 3), math::StageSpec::linear(3, 1)}, {1}};
  const auto r = check_chain_gradients(c, 10, 1e-5, 1e-6, 1);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_deviation, 1e-10);
}

TEST(Verify, TanhAndReluChains) {
  EXPECT_TRUE(check_chain_gradients(harness::mlp_chain(4, {5, 5}, 3), 20, 1e-5, 1e-6, 2).pass);
  math::ModelChain relu{{math::StageSpec::linear(4, 5), math::StageSpec::relu(5), math::StageSpec::linear(5, 1),
                         math::StageSpec::logistic_loss_head()},
                        {2}};
  EXPECT_TRUE(check_chain_gradients(relu, 20, 1e-5, 1e-6, 3).pass);
}

TEST(Verify, EfDecayExamples) {
  const auto id = check_ef_decay(CompressorSpec::identity(), 8, 3, 5, 1);
  EXPECT_TRUE(id.pass);
  for (const auto& c : id.diagnostics) EXPECT_EQ(c.detail, "exact zero at step 1");
  const auto topk = check_ef_decay(CompressorSpec::topk(1), 2, 3, 5, 1);
  EXPECT_TRUE(topk.pass);
  for (const auto& c : topk.diagnostics) EXPECT_EQ(c.detail, "exact zero at step 2");
  EXPECT_TRUE(check_ef_decay(CompressorSpec::uniform_quant(8), 16, 30, 5, 1).pass);
}

TEST(Verify, ContractionSuites) {
  EXPECT_TRUE(check_contraction(CompressorSpec::topk(3), 12, 1000, 1).pass);
  EXPECT_TRUE(check_contraction(CompressorSpec::randk(3), 12, 10000, 1).pass);
  EXPECT_TRUE(check_contraction(CompressorSpec::natural(), 12, 1000, 1).pass);
}

TEST(Verify, IdentityEquivalenceOnLogisticModel) {
  const auto s = logistic_setup();
  const std::vector<engine::Variant> vs{engine::Variant::ClappingFC, engine::Variant::ClappingFU,
                                        engine::Variant::Direct, engine::Variant::ForwardEFOnly};
  const auto r = check_identity_equivalence(s, vs, CompressorSpec::identity(), 1000, 1e-12);
  EXPECT_TRUE(r.pass) << to_json(r);
}

TEST(Verify, TopKBreaksEquivalence) {
  const auto s = logistic_setup();
  const auto r = check_identity_equivalence(
      s, {engine::Variant::ClappingFC, engine::Variant::Direct, engine::Variant::ForwardEFOnly},
      CompressorSpec::topk(1), 50, 1e-12);
  EXPECT_FALSE(r.pass);
  for (const auto& c : r.diagnostics) EXPECT_FALSE(c.pass) << c.name;
}

TEST(Verify, ErrorPropagationIdentityHasNoError) {
  const std::vector<engine::BoundaryCompressors> id{{CompressorSpec::identity(), CompressorSpec::identity()}};
  const auto r = check_error_propagation(harness::mlp_chain(4, {5}, 2), id, 10, 1e-9, 1);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.max_deviation, 0.0);
}

TEST(Verify, ErrorPropagationThreeWorkerTanhTopK) {
  const std::vector<engine::BoundaryCompressors> topk{{CompressorSpec::topk(2), CompressorSpec::topk(2)}};
  const auto r = check_error_propagation(harness::mlp_chain(4, {6, 6}, 3), topk, 100, 1e-9, 2);
  EXPECT_TRUE(r.pass) << to_json(r);
  EXPECT_FALSE(r.advisory);
}

TEST(Verify, SamplerStats) {
  EXPECT_TRUE(check_sampler_stats(1.0, 1000, 3.0, 1, engine::SamplingRule::SingleSample, 1).pass);
  EXPECT_TRUE(check_sampler_stats(0.0, 1000, 3.0, 1, engine::SamplingRule::SingleSample, 1).pass);
  EXPECT_TRUE(check_sampler_stats(0.4, 10000, 3.0, 1, engine::SamplingRule::SingleSample, 1).pass);
}

TEST(Verify, ReportSerializes) {
  const auto r = check_contraction(CompressorSpec::topk(1), 4, 100, 1);
  const auto j = nlohmann::json::parse(to_json(r));
  EXPECT_EQ(j["suite"], "contraction/topk(k=1)");
  EXPECT_EQ(j["pass"], true);
  EXPECT_EQ(j["diagnostics"].size(), 1u);
  EXPECT_EQ(r.pass, r.max_deviation <= r.tolerance);
}
