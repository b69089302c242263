#include "clapping/engine/engine.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "clapping/error.hpp"

namespace clapping::engine {

using comms::Direction;
using compress::CompressorSpec;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::NoComp: return "nocomp";
    case Variant::Direct: return "direct";
    case Variant::ForwardEFOnly: return "forward_ef";
    case Variant::AQSGD: return "aqsgd";
    case Variant::ClappingFC: return "clapping_fc";
    case Variant::ClappingFU: return "clapping_fu";
  }
  return "?";
}

Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::NoComp, Variant::Direct, Variant::ForwardEFOnly, Variant::AQSGD, Variant::ClappingFC,
                 Variant::ClappingFU})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) +
                    "' (nocomp|direct|forward_ef|aqsgd|clapping_fc|clapping_fu)");
}

bool uses_lazy_sampling(Variant v) { return v == Variant::ClappingFC || v == Variant::ClappingFU; }

const BoundaryCompressors& AlgoConfig::compressors_for(std::size_t boundary) const {
  if (compressors.size() == 1) return compressors.front();
  return compressors.at(boundary);
}

void AlgoConfig::validate(const math::ModelChain& chain) const {
  chain.validate();
  optimizer.validate();
  if (batch_size == 0) throw ConfigError("must be positive", "algo.batch_size");
  if (sampling_rule == SamplingRule::SingleSample && batch_size != 1)
    throw ConfigError("single-sample rule needs batch_size = 1", "algo.sampling");
  if (resample_p.min_value() < 0.0 || resample_p.max_value() > 1.0)
    throw ConfigError("resample probability must lie in [0,1]", "algo.p");
  if (compressors.empty() || (compressors.size() != 1 && compressors.size() != chain.num_boundaries()))
    throw ConfigError("need one compressor pair per boundary, or a single pair", "compress");
  for (std::size_t b = 0; b < chain.num_boundaries(); ++b) {
    const auto& c = compressors_for(b);
    const std::string where = "compress.b" + std::to_string(b);
    try {
      c.forward.validate(chain.boundary_dim(b));
    } catch (const ConfigError& e) {
      throw ConfigError(e.message(), where + ".forward");
    }
    try {
      c.backward.validate(chain.boundary_dim(b));
    } catch (const ConfigError& e) {
      throw ConfigError(e.message(), where + ".backward");
    }
  }
  if (!(bandwidth_bps > 0.0)) throw ConfigError("must be positive", "comms.bandwidth_bps");
  if (!(latency_seconds >= 0.0)) throw ConfigError("must be >= 0", "comms.latency_seconds");
}

ExchangeResult exchange_row(ExchangeMode mode, const CompressorSpec& spec, math::ConstView computed,
                            math::MutView sender, math::MutView receiver, RngStream* rng,
                            compress::CompressedPayload& scratch) {
  const std::size_t d = computed.size();
  if (sender.size() != d || receiver.size() != d) throw ContractViolation("exchange: cache length mismatch");
  ExchangeResult res;
  switch (mode) {
    case ExchangeMode::Dense:
      compress::compress_into(CompressorSpec::identity(), computed, nullptr, scratch);
      std::copy(computed.begin(), computed.end(), sender.begin());
      std::copy(computed.begin(), computed.end(), receiver.begin());
      break;
    case ExchangeMode::Direct:
      compress::compress_into(spec, computed, rng, scratch);
      std::copy(scratch.reconstruction.begin(), scratch.reconstruction.end(), sender.begin());
      std::copy(scratch.reconstruction.begin(), scratch.reconstruction.end(), receiver.begin());
      break;
    case ExchangeMode::ErrorFeedback: {
      math::Vector diff(d);
      for (std::size_t i = 0; i < d; ++i) diff[i] = computed[i] - sender[i];
      compress::compress_into(spec, diff, rng, scratch);
      for (std::size_t i = 0; i < d; ++i) {
        sender[i] += scratch.reconstruction[i];
        receiver[i] += scratch.reconstruction[i];
      }
      break;
    }
  }
  if (std::memcmp(sender.data(), receiver.data(), d * sizeof(double)) != 0)
    throw ContractViolation("exchange: sender and receiver caches diverged");
  res.payload_bytes = scratch.encoded_bytes;
  res.value_bytes = scratch.value_bytes;
  res.kind = scratch.body.kind;
  return res;
}

namespace {

RngStream stream_for(std::uint64_t seed, const CompressorSpec& spec, std::size_t b, const char* dir) {
  if (!spec.seed_stream.empty()) return RngStream(seed, spec.seed_stream);
  return RngStream(seed, "compressor/b" + std::to_string(b) + "/" + dir);
}

bool exact_kind(comms::WireKind k) { return k != comms::WireKind::Dense && k != comms::WireKind::Sparse; }

void verify_message(const compress::CompressedPayload& p, std::uint32_t step, std::size_t boundary, Direction dir,
                    std::vector<std::uint8_t>& buf) {
  comms::WireHeader h{step, static_cast<std::uint16_t>(boundary), dir, p.body.kind};
  buf = comms::encode_message(h, p.body);
  if (buf.size() != comms::kHeaderBytes + p.encoded_bytes)
    throw ContractViolation("wire: message length disagrees with the accounted size");
  const auto msg = comms::decode_message(buf, comms::context_for(p.body));
  if (msg.body.indices != p.body.indices) throw ContractViolation("wire: indices changed in transit");
  if (exact_kind(p.body.kind)) {
    const auto rec = comms::reconstruct(msg.body);
    if (std::memcmp(rec.data(), p.reconstruction.data(), rec.size() * sizeof(double)) != 0)
      throw ContractViolation("wire: decoded reconstruction differs from the sender's");
  }
}

}  // namespace

PipelineEngine::PipelineEngine(math::ModelChain chain, AlgoConfig config, std::shared_ptr<const DataSource> data,
                               math::ParamSet initial_params)
    : chain_(std::move(chain)),
      config_(std::move(config)),
      data_(std::move(data)),
      params_(std::move(initial_params)),
      sampling_rng_(config_.seed, "sampling"),
      ledger_(chain_.num_boundaries(), config_.bandwidth_bps, config_.latency_seconds) {
  config_.validate(chain_);
  if (!data_) throw ConfigError("engine needs a data source", "dataset");
  if (data_->dim() != chain_.input_dim())
    throw ConfigError("dataset dimension " + std::to_string(data_->dim()) + " != model input " +
                          std::to_string(chain_.input_dim()),
                      "dataset.dim");
  if (config_.variant == Variant::AQSGD && !data_->size())
    throw UnsupportedError("AQ-SGD needs a finite dataset; got an unbounded stream");
  if (params_.size() != chain_.stages.size()) throw ContractViolation("engine: ParamSet size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].size() != chain_.stages[i].param_dim) throw ContractViolation("engine: parameter length mismatch");

  momentum_ = math::zero_params(chain_);
  second_ = math::zero_params(chain_);
  grads_ = math::zero_params(chain_);

  const std::size_t B = config_.batch_size;
  const std::size_t E = chain_.num_workers();
  for (std::size_t e = 0; e < E; ++e) {
    workers_.emplace_back(chain_, e);
    tapes_.emplace_back(B, workers_.back().make_tape());
  }
  x_ = math::Batch(B, chain_.input_dim());
  for (std::size_t b = 0; b + 1 < E; ++b) {
    const std::size_t d = chain_.boundary_dim(b);
    y_.emplace_back(B, d);
    v_.emplace_back(B, d);
    fwd_send_.emplace_back(B, d);
    fwd_recv_.emplace_back(B, d);
    bwd_send_.emplace_back(B, d);
    bwd_recv_.emplace_back(B, d);
    if (config_.variant == Variant::AQSGD) {
      aq_send_.emplace_back(*data_->size(), d);
      aq_recv_.emplace_back(*data_->size(), d);
    }
    const auto& c = config_.compressors_for(b);
    fwd_rng_.push_back(stream_for(config_.seed, c.forward, b, "fwd"));
    bwd_rng_.push_back(stream_for(config_.seed, c.backward, b, "bwd"));
  }

  sampler_.rule = config_.sampling_rule;
  sampler_.batch_size = B;
  sampler_.order = config_.sample_order;
  sampler_.p = uses_lazy_sampling(config_.variant) ? config_.resample_p : Schedule(1.0);
  sampler_.force_fresh_at_step_2 = config_.force_fresh_at_step_2;
}

ExchangeMode PipelineEngine::forward_mode(bool fresh_row) const {
  switch (config_.variant) {
    case Variant::NoComp: return ExchangeMode::Dense;
    case Variant::Direct: return ExchangeMode::Direct;
    case Variant::ClappingFU: return fresh_row ? ExchangeMode::Dense : ExchangeMode::ErrorFeedback;
    default: return ExchangeMode::ErrorFeedback;
  }
}

ExchangeMode PipelineEngine::backward_mode(bool fresh_row) const {
  switch (config_.variant) {
    case Variant::NoComp: return ExchangeMode::Dense;
    case Variant::ClappingFC: return ExchangeMode::ErrorFeedback;
    case Variant::ClappingFU: return fresh_row ? ExchangeMode::Dense : ExchangeMode::ErrorFeedback;
    default: return ExchangeMode::Direct;
  }
}

IterationMetrics PipelineEngine::run_iteration() {
  const auto s = lazy_sample(sampler_, *data_, sampling_rng_);
  return step_on(s.ids, s.fresh);
}

IterationMetrics PipelineEngine::aqsgd_step(std::uint64_t sample_index) {
  if (config_.variant != Variant::AQSGD) throw ConfigError("aqsgd_step needs the aqsgd variant", "algo.variant");
  if (config_.batch_size != 1) throw ConfigError("aqsgd_step needs batch_size = 1", "algo.batch_size");
  return step_on({sample_index}, {1});
}

IterationMetrics PipelineEngine::step_on(const std::vector<std::uint64_t>& ids, const std::vector<std::uint8_t>& fresh) {
  const std::size_t B = config_.batch_size;
  const std::size_t E = chain_.num_workers();
  if (ids.size() != B || fresh.size() != B) throw ContractViolation("engine: need one id and flag per batch slot");
  if (data_->size())
    for (auto id : ids)
      if (id >= *data_->size()) throw ContractViolation("engine: sample id out of range");

  const std::uint64_t t = ++step_;
  const auto step32 = static_cast<std::uint32_t>(t);
  IterationMetrics m;
  m.step = t;
  for (auto f : fresh) m.fresh_rows += f ? 1 : 0;
  m.f_fu = m.fresh_rows > 0;

  for (std::size_t r = 0; r < B; ++r) data_->load(ids[r], x_.row(r));

  // Forward sweep.
  double loss = 0.0;
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t r = 0; r < B; ++r) {
      const math::ConstView in = e == 0 ? x_.row(r) : fwd_recv_[e - 1].row(r);
      const math::ConstView out = workers_[e].forward(in, params_, tapes_[e][r]);
      if (e + 1 == E) {
        loss += out[0];
        continue;
      }
      std::copy(out.begin(), out.end(), y_[e].row(r).begin());
      const auto& spec = config_.compressors_for(e).forward;
      ExchangeResult res;
      if (config_.variant == Variant::AQSGD) {
        const auto id = static_cast<std::size_t>(ids[r]);
        res = exchange_row(ExchangeMode::ErrorFeedback, spec, out, aq_send_[e].row(id), aq_recv_[e].row(id),
                           &fwd_rng_[e], scratch_);
        std::copy(aq_send_[e].row(id).begin(), aq_send_[e].row(id).end(), fwd_send_[e].row(r).begin());
        std::copy(aq_recv_[e].row(id).begin(), aq_recv_[e].row(id).end(), fwd_recv_[e].row(r).begin());
      } else {
        res = exchange_row(forward_mode(fresh[r] != 0), spec, out, fwd_send_[e].row(r), fwd_recv_[e].row(r),
                           &fwd_rng_[e], scratch_);
      }
      if (config_.verify_wire) verify_message(scratch_, step32, e, Direction::Forward, wire_buf_);
      ledger_.record(e, Direction::Forward, res.payload_bytes, res.value_bytes);
      m.fwd_bytes += res.payload_bytes;
    }
  }
  m.loss = loss / static_cast<double>(B);

  // Backward sweep with updates.
  const double lr = config_.optimizer.lr.at(t);
  const double mt = config_.optimizer.momentum.at(t);
  bool reset = false;
  for (auto s : config_.momentum_reset_steps) reset = reset || s == t;
  const double scale = 1.0 / static_cast<double>(B);
  const math::Vector one{1.0};
  double grad_sq = 0.0;
  for (std::size_t e = E; e-- > 0;) {
    const auto& w = workers_[e];
    for (std::size_t i = w.first_stage(); i < w.last_stage(); ++i) std::fill(grads_[i].begin(), grads_[i].end(), 0.0);
    for (std::size_t r = 0; r < B; ++r) {
      const math::ConstView v_out = e + 1 == E ? math::ConstView(one) : bwd_recv_[e].row(r);
      const math::MutView v_in = e > 0 ? v_[e - 1].row(r) : math::MutView();
      w.backward(tapes_[e][r], params_, v_out, v_in, grads_, scale);
    }
    for (std::size_t i = w.first_stage(); i < w.last_stage(); ++i) {
      if (grads_[i].empty()) continue;
      grad_sq += math::squared_norm(grads_[i]);
      if (reset) std::fill(momentum_[i].begin(), momentum_[i].end(), 0.0);
      if (config_.optimizer.kind == OptimizerKind::MomentumSGD)
        momentum_update(momentum_[i], params_[i], grads_[i], mt, lr);
      else
        adam_update(momentum_[i], second_[i], params_[i], grads_[i], config_.optimizer.beta1,
                    config_.optimizer.beta2, config_.optimizer.eps, lr);
    }
    if (e == 0) continue;
    const std::size_t b = e - 1;
    const auto& spec = config_.compressors_for(b).backward;
    for (std::size_t r = 0; r < B; ++r) {
      const auto res = exchange_row(backward_mode(fresh[r] != 0), spec, v_[b].row(r), bwd_send_[b].row(r),
                                    bwd_recv_[b].row(r), &bwd_rng_[b], scratch_);
      if (config_.verify_wire) verify_message(scratch_, step32, b, Direction::Backward, wire_buf_);
      ledger_.record(b, Direction::Backward, res.payload_bytes, res.value_bytes);
      m.bwd_bytes += res.payload_bytes;
    }
  }
  m.grad_norm = std::sqrt(grad_sq);
  m.total_fwd_bytes = ledger_.total_payload_bytes(Direction::Forward);
  m.total_bwd_bytes = ledger_.total_payload_bytes(Direction::Backward);
  m.sim_seconds = ledger_.simulated_seconds();
  return m;
}

const math::Batch& PipelineEngine::activation_cache(std::size_t b, Side side) const {
  return side == Side::Sender ? fwd_send_.at(b) : fwd_recv_.at(b);
}

const math::Batch& PipelineEngine::gradient_cache(std::size_t b, Side side) const {
  return side == Side::Sender ? bwd_send_.at(b) : bwd_recv_.at(b);
}

std::size_t PipelineEngine::cache_entries(std::size_t b) const {
  if (b >= chain_.num_boundaries()) throw ContractViolation("engine: boundary out of range");
  switch (config_.variant) {
    case Variant::AQSGD: return aq_send_[b].rows();
    case Variant::ClappingFC:
    case Variant::ClappingFU:
    case Variant::ForwardEFOnly: return config_.batch_size;
    default: return 0;
  }
}

math::ConstView PipelineEngine::aqsgd_cache(std::size_t b, std::uint64_t id, Side side) const {
  if (config_.variant != Variant::AQSGD) throw ConfigError("no per-sample cache outside aqsgd", "algo.variant");
  const auto& cache = side == Side::Sender ? aq_send_.at(b) : aq_recv_.at(b);
  if (id >= cache.rows()) throw ContractViolation("engine: sample id out of range");
  return cache.row(static_cast<std::size_t>(id));
}

}  // namespace clapping::engine
