#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "clapping/engine/data.hpp"
#include "clapping/engine/schedule.hpp"
#include "clapping/rng.hpp"

namespace clapping::engine {

/// SingleSample keeps one sample. BatchSampleWise retains or refreshes each
/// batch slot independently. BatchBatchWise retains or refreshes the whole
/// batch at once.
enum class SamplingRule { SingleSample, BatchSampleWise, BatchBatchWise };

/// How a fresh id is chosen from a finite dataset: uniformly with
/// replacement, or by walking a reshuffled permutation each epoch.
enum class SampleOrder { WithReplacement, EpochShuffle };

std::string_view to_string(SamplingRule r);
SamplingRule parse_sampling_rule(std::string_view s);
std::string_view to_string(SampleOrder o);
SampleOrder parse_sample_order(std::string_view s);

struct SamplerState {
  SamplingRule rule = SamplingRule::SingleSample;
  std::size_t batch_size = 1;
  Schedule p{1.0};
  SampleOrder order = SampleOrder::WithReplacement;
  /// Treat step 2 as p = 1 regardless of the schedule.
  bool force_fresh_at_step_2 = false;

  /// Number of completed draws; the next call samples step `step + 1`.
  std::uint64_t step = 0;
  std::vector<std::uint64_t> current;
  /// 1 for slots refreshed by the last draw.
  std::vector<std::uint8_t> fresh;
  bool f_fu = false;

  std::uint64_t next_stream_id = 0;
  std::vector<std::uint64_t> permutation;
  std::size_t permutation_pos = 0;

  std::uint64_t fresh_draws = 0;  // slots refreshed over all steps
};

struct LazySample {
  const std::vector<std::uint64_t>& ids;
  const std::vector<std::uint8_t>& fresh;
  bool f_fu;
};

/// Advances the sampler by one step. At t = 1 every slot is fresh; afterwards
/// a slot (or the batch) is refreshed with probability p_t and f_FU reports
/// whether anything was refreshed.
LazySample lazy_sample(SamplerState& s, const DataSource& data, RngStream& rng);

}  // namespace clapping::engine
