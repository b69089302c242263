#include "suites.hpp"

#include <functional>
#include <map>
#include <memory>

#include "clapping/error.hpp"
#include "clapping/harness/dataset.hpp"

namespace clapping::tools {

namespace {

using compress::CompressorSpec;
using Reports = std::vector<verify::CheckReport>;

Reports gradients(std::uint64_t seed) {
  Reports out;
  for (const auto& s : {math::StageSpec::linear(5, 3), math::StageSpec::linear(4, 2, true),
                        math::StageSpec::affine_bias(6, 4), math::StageSpec::tanh(6), math::StageSpec::relu(6),
                        math::StageSpec::logistic_loss_head(), math::StageSpec::regularized_logistic_head(0.005)})
    out.push_back(verify::check_stage_gradients(s, 100, 1e-5, 1e-6, seed));
  out.push_back(verify::check_chain_gradients(harness::mlp_chain(6, {8, 8}, 3), 20, 1e-5, 1e-6, seed));
  out.push_back(verify::check_chain_gradients(harness::logistic_chain(10, 0.005), 20, 1e-5, 1e-6, seed));
  return out;
}

Reports contraction(std::uint64_t seed) {
  Reports out;
  const std::size_t d = 64;
  for (const auto& s : {CompressorSpec::topk(8), CompressorSpec::randk(8), CompressorSpec::uniform_quant(8),
                        CompressorSpec::uniform_quant(4), CompressorSpec::natural(),
                        CompressorSpec::compose({CompressorSpec::topk(16), CompressorSpec::uniform_quant(8)})})
    out.push_back(verify::check_contraction(s, d, 10000, seed));
  return out;
}

Reports ef_decay(std::uint64_t seed) {
  Reports out;
  for (const auto& s : {CompressorSpec::identity(), CompressorSpec::topk(4), CompressorSpec::uniform_quant(8),
                        CompressorSpec::natural()})
    out.push_back(verify::check_ef_decay(s, 32, 40, 20, seed));
  return out;
}

verify::EquivalenceSetup mlp_setup(std::uint64_t seed) {
  harness::MLPDatasetSpec ds;
  ds.n = 256;
  ds.dim = 6;
  ds.hidden = {8, 8};
  ds.seed = seed;
  verify::EquivalenceSetup s;
  s.chain = harness::mlp_chain(ds.dim, ds.hidden, 3);
  s.data = std::make_shared<engine::InMemoryDataset>(harness::fold_labels(harness::gen_mlp_dataset(ds), false));
  RngStream rng(seed, "init");
  s.initial_params = math::random_params(s.chain, rng, 0.3);
  s.base.batch_size = 4;
  s.base.sampling_rule = engine::SamplingRule::BatchBatchWise;
  s.base.seed = seed;
  s.base.optimizer.lr = engine::Schedule(0.05);
  s.base.optimizer.momentum = engine::Schedule(0.1);
  return s;
}

const std::vector<engine::Variant> kEquivalenceVariants{engine::Variant::ClappingFC, engine::Variant::ClappingFU,
                                                        engine::Variant::Direct, engine::Variant::ForwardEFOnly};

Reports equivalence(std::uint64_t seed) {
  const auto setup = mlp_setup(seed);
  Reports out;
  out.push_back(verify::check_identity_equivalence(setup, kEquivalenceVariants, CompressorSpec::identity(), 1000, 1e-12));
  // Negative control: Top-K must break the equivalence. FU is left out since
  // with p = 1 every row is fresh and crosses dense, so it matches NoComp.
  auto neg = verify::check_identity_equivalence(
      setup, {engine::Variant::ClappingFC, engine::Variant::Direct, engine::Variant::ForwardEFOnly},
      CompressorSpec::topk(2), 200, 1e-12);
  verify::CheckReport control;
  control.suite = "equivalence_negative_control";
  control.tolerance = 0.0;
  for (const auto& c : neg.diagnostics) control.add({c.name, c.pass ? 1.0 : 0.0, !c.pass, "expected to diverge"});
  control.finish();
  out.push_back(std::move(control));
  return out;
}

Reports propagation(std::uint64_t seed) {
  Reports out;
  const std::vector<engine::BoundaryCompressors> topk{{CompressorSpec::topk(3), CompressorSpec::topk(3)}};
  out.push_back(verify::check_error_propagation(harness::mlp_chain(6, {8}, 2), topk, 100, 1e-9, seed));
  out.push_back(verify::check_error_propagation(harness::mlp_chain(6, {8, 8}, 3), topk, 100, 1e-9, seed));
  return out;
}

Reports sampler(std::uint64_t seed) {
  Reports out;
  for (double p : {0.0, 0.4, 1.0}) {
    out.push_back(verify::check_sampler_stats(p, 10000, 3.0, seed, engine::SamplingRule::SingleSample, 1));
    out.back().suite += "/p=" + std::to_string(p).substr(0, 3);
  }
  return out;
}

const std::map<std::string, std::function<Reports(std::uint64_t)>>& registry() {
  static const std::map<std::string, std::function<Reports(std::uint64_t)>> r{
      {"gradients", gradients}, {"contraction", contraction}, {"ef_decay", ef_decay},
      {"equivalence", equivalence}, {"propagation", propagation}, {"sampler", sampler}};
  return r;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> names{"all"};
  for (const auto& [k, _] : registry()) names.push_back(k);
  return names;
}

std::vector<verify::CheckReport> run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "all") {
    Reports out;
    for (const auto& [_, fn] : registry())
      for (auto& r : fn(seed)) out.push_back(std::move(r));
    return out;
  }
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown suite '" + name + "'", "suite");
  return it->second(seed);
}

}  // namespace clapping::tools
