#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "clapping/comms/ledger.hpp"
#include "clapping/compress/compressor.hpp"
#include "clapping/engine/data.hpp"
#include "clapping/engine/optimizer.hpp"
#include "clapping/engine/sampler.hpp"
#include "clapping/math/worker_op.hpp"

namespace clapping::engine {

/// Forward / backward treatment per variant:
///
///   NoComp         dense            / dense
///   Direct         C(y)             / C(v)
///   ForwardEFOnly  error feedback   / C(v)
///   AQSGD          EF against a per-sample cache / C(v)
///   ClappingFC     error feedback   / error feedback
///   ClappingFU     dense on fresh rows, else EF (both directions)
///
/// Only the two Clapping variants sample lazily; the others draw a fresh
/// batch every step.
enum class Variant { NoComp, Direct, ForwardEFOnly, AQSGD, ClappingFC, ClappingFU };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
bool uses_lazy_sampling(Variant v);

struct BoundaryCompressors {
  compress::CompressorSpec forward;
  compress::CompressorSpec backward;
};

struct AlgoConfig {
  Variant variant = Variant::NoComp;
  OptimizerConfig optimizer;
  /// One entry per boundary, or a single entry applied to every boundary.
  std::vector<BoundaryCompressors> compressors{BoundaryCompressors{}};
  std::size_t batch_size = 1;
  std::uint64_t total_steps = 0;
  std::uint64_t seed = 0;
  SamplingRule sampling_rule = SamplingRule::SingleSample;
  SampleOrder sample_order = SampleOrder::WithReplacement;
  Schedule resample_p{1.0};
  bool force_fresh_at_step_2 = false;
  /// Steps at which the momentum state ũ is zeroed before the update.
  std::vector<std::uint64_t> momentum_reset_steps;
  /// Encode every message, check its length against the size formula, and
  /// check that quantized bodies decode to the reconstruction in use.
  bool verify_wire = true;
  double bandwidth_bps = 100e6;
  double latency_seconds = 0.0;

  const BoundaryCompressors& compressors_for(std::size_t boundary) const;
  void validate(const math::ModelChain& chain) const;
};

struct IterationMetrics {
  std::uint64_t step = 0;
  /// Mean loss of the batch as seen through the compressed pipeline.
  double loss = 0.0;
  /// Norm of the (batch-averaged) weight-gradient estimate, all workers.
  double grad_norm = 0.0;
  std::uint64_t fwd_bytes = 0;
  std::uint64_t bwd_bytes = 0;
  std::uint64_t total_fwd_bytes = 0;
  std::uint64_t total_bwd_bytes = 0;
  double sim_seconds = 0.0;
  bool f_fu = false;
  std::size_t fresh_rows = 0;
};

/// How one row crosses a boundary.
enum class ExchangeMode { Dense, Direct, ErrorFeedback };

struct ExchangeResult {
  std::size_t payload_bytes = 0;
  std::size_t value_bytes = 0;
  comms::WireKind kind = comms::WireKind::Dense;
};

/// Sends `computed` across a boundary and updates both endpoint copies of the
/// cache row identically. Dense: cache := computed. Direct: cache := C(computed).
/// ErrorFeedback: cache += C(computed − cache). Throws ContractViolation if
/// the two copies disagree afterwards.
ExchangeResult exchange_row(ExchangeMode mode, const compress::CompressorSpec& spec, math::ConstView computed,
                            math::MutView sender_cache, math::MutView receiver_cache, RngStream* rng,
                            compress::CompressedPayload& scratch);

/// Sequential simulation of E pipeline workers.
///
/// Each iteration samples, runs the forward sweep over workers 0..E−1
/// (exchanging activations across every boundary), then the backward sweep
/// E−1..0. At worker e the activation gradient sent back is taken with the
/// weights used in the forward pass, after which w_e is updated.
class PipelineEngine {
 public:
  PipelineEngine(math::ModelChain chain, AlgoConfig config, std::shared_ptr<const DataSource> data,
                 math::ParamSet initial_params);

  /// Samples per the configured rule and runs step t = step() + 1.
  IterationMetrics run_iteration();
  /// Runs one step on caller-chosen sample ids; `fresh` marks refreshed slots.
  IterationMetrics step_on(const std::vector<std::uint64_t>& ids, const std::vector<std::uint8_t>& fresh);
  /// One AQ-SGD step on a single sample (batch size 1 only).
  IterationMetrics aqsgd_step(std::uint64_t sample_index);

  std::uint64_t step() const noexcept { return step_; }
  const math::ModelChain& chain() const noexcept { return chain_; }
  const AlgoConfig& config() const noexcept { return config_; }
  const math::ParamSet& params() const noexcept { return params_; }
  const math::ParamSet& momentum_state() const noexcept { return momentum_; }
  const math::ParamSet& second_moment() const noexcept { return second_; }
  const comms::TransferLedger& ledger() const noexcept { return ledger_; }
  const SamplerState& sampler() const noexcept { return sampler_; }

  enum class Side { Sender, Receiver };
  /// ỹ at boundary b (rows = batch slots).
  const math::Batch& activation_cache(std::size_t b, Side side) const;
  /// ṽ at boundary b.
  const math::Batch& gradient_cache(std::size_t b, Side side) const;
  /// The activation each slot produced at boundary b before compression.
  const math::Batch& computed_activation(std::size_t b) const { return y_[b]; }
  /// The activation gradient computed at boundary b before compression.
  const math::Batch& computed_gradient(std::size_t b) const { return v_[b]; }

  /// Cached vectors held per boundary for error feedback: N for AQ-SGD, the
  /// batch size for the Clapping variants, zero otherwise.
  std::size_t cache_entries(std::size_t b) const;
  /// AQ-SGD per-sample cache row for sample `id` at boundary b.
  math::ConstView aqsgd_cache(std::size_t b, std::uint64_t id, Side side) const;

 private:
  ExchangeMode forward_mode(bool fresh_row) const;
  ExchangeMode backward_mode(bool fresh_row) const;

  math::ModelChain chain_;
  AlgoConfig config_;
  std::shared_ptr<const DataSource> data_;
  std::vector<math::WorkerOperator> workers_;
  math::ParamSet params_;
  math::ParamSet momentum_;
  math::ParamSet second_;
  math::ParamSet grads_;

  SamplerState sampler_;
  RngStream sampling_rng_;
  std::vector<RngStream> fwd_rng_;
  std::vector<RngStream> bwd_rng_;

  math::Batch x_;
  std::vector<math::Batch> y_;         // computed activation per boundary
  std::vector<math::Batch> v_;         // computed activation gradient per boundary
  std::vector<math::Batch> fwd_send_;  // ỹ on worker b
  std::vector<math::Batch> fwd_recv_;  // ỹ on worker b+1
  std::vector<math::Batch> bwd_send_;  // ṽ on worker b+1
  std::vector<math::Batch> bwd_recv_;  // ṽ on worker b
  std::vector<math::Batch> aq_send_;
  std::vector<math::Batch> aq_recv_;
  std::vector<std::vector<math::WorkerOperator::Tape>> tapes_;  // [worker][row]

  comms::TransferLedger ledger_;
  compress::CompressedPayload scratch_;
  std::vector<std::uint8_t> wire_buf_;
  std::uint64_t step_ = 0;
};

}  // namespace clapping::engine
