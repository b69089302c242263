#include "clapping/engine/sampler.hpp"

#include <numeric>
#include <string>

#include "clapping/error.hpp"

namespace clapping::engine {

std::string_view to_string(SamplingRule r) {
  switch (r) {
    case SamplingRule::SingleSample: return "single";
    case SamplingRule::BatchSampleWise: return "sample_wise";
    case SamplingRule::BatchBatchWise: return "batch_wise";
  }
  return "?";
}

SamplingRule parse_sampling_rule(std::string_view s) {
  for (auto r : {SamplingRule::SingleSample, SamplingRule::BatchSampleWise, SamplingRule::BatchBatchWise})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown sampling rule '" + std::string(s) + "' (single|sample_wise|batch_wise)");
}

std::string_view to_string(SampleOrder o) {
  return o == SampleOrder::WithReplacement ? "with_replacement" : "epoch_shuffle";
}

SampleOrder parse_sample_order(std::string_view s) {
  if (s == "with_replacement") return SampleOrder::WithReplacement;
  if (s == "epoch_shuffle") return SampleOrder::EpochShuffle;
  throw ConfigError("unknown sample order '" + std::string(s) + "' (with_replacement|epoch_shuffle)");
}

namespace {

std::uint64_t draw_id(SamplerState& s, const DataSource& data, RngStream& rng) {
  const auto n = data.size();
  if (!n) return s.next_stream_id++;
  if (s.order == SampleOrder::WithReplacement) return rng.index(*n);
  if (s.permutation_pos == s.permutation.size()) {
    s.permutation.resize(*n);
    std::iota(s.permutation.begin(), s.permutation.end(), std::uint64_t{0});
    for (std::size_t i = *n; i > 1; --i) std::swap(s.permutation[i - 1], s.permutation[rng.index(i)]);
    s.permutation_pos = 0;
  }
  return s.permutation[s.permutation_pos++];
}

}  // namespace

LazySample lazy_sample(SamplerState& s, const DataSource& data, RngStream& rng) {
  if (data.size() && *data.size() == 0) throw ConfigError("dataset is empty", "dataset.n");
  if (s.batch_size == 0) throw ConfigError("batch size must be positive", "algo.batch_size");
  if (s.rule == SamplingRule::SingleSample && s.batch_size != 1)
    throw ConfigError("single-sample rule needs batch size 1", "algo.batch_size");

  const std::uint64_t t = ++s.step;
  s.current.resize(s.batch_size);
  s.fresh.assign(s.batch_size, 0);
  double p = s.p.at(t);
  if (t == 2 && s.force_fresh_at_step_2) p = 1.0;

  if (t == 1) {
    s.fresh.assign(s.batch_size, 1);
  } else if (s.rule == SamplingRule::BatchSampleWise) {
    for (auto& f : s.fresh) f = rng.bernoulli(p) ? 1 : 0;
  } else {
    const bool refresh = rng.bernoulli(p);
    s.fresh.assign(s.batch_size, refresh ? 1 : 0);
  }

  s.f_fu = false;
  for (std::size_t i = 0; i < s.batch_size; ++i) {
    if (!s.fresh[i]) continue;
    s.current[i] = draw_id(s, data, rng);
    s.f_fu = true;
    ++s.fresh_draws;
  }
  return {s.current, s.fresh, s.f_fu};
}

}  // namespace clapping::engine
