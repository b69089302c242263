#include "clapping/math/chain.hpp"

#include <string>

#include "clapping/math/worker_op.hpp"

namespace clapping::math {

void ModelChain::validate() const {
  if (stages.empty()) throw ContractViolation("chain: no stages");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].validate();
    if (i + 1 < stages.size() && stages[i].output_dim != stages[i + 1].input_dim)
      throw ContractViolation("chain: stage " + std::to_string(i) + " output_dim " +
                              std::to_string(stages[i].output_dim) + " != stage " +
                              std::to_string(i + 1) + " input_dim " +
                              std::to_string(stages[i + 1].input_dim));
  }
  if (stages.back().output_dim != 1) throw ContractViolation("chain: final output_dim must be 1");
  std::size_t prev = 0;
  for (std::size_t b : boundaries) {
    if (b <= prev || b >= stages.size())
      throw ContractViolation("chain: boundaries must be strictly increasing in [1, stages)");
    prev = b;
  }
}

std::pair<std::size_t, std::size_t> ModelChain::worker_stages(std::size_t worker) const {
  if (worker >= num_workers()) throw ContractViolation("chain: worker index out of range");
  const std::size_t first = worker == 0 ? 0 : boundaries[worker - 1];
  const std::size_t last = worker + 1 == num_workers() ? stages.size() : boundaries[worker];
  return {first, last};
}

std::size_t ModelChain::boundary_dim(std::size_t b) const {
  if (b >= boundaries.size()) throw ContractViolation("chain: boundary index out of range");
  return stages[boundaries[b]].input_dim;
}

std::size_t ModelChain::total_params() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.param_dim;
  return n;
}

double chain_loss(const ModelChain& chain, ConstView x, const ParamSet& params) {
  if (params.size() != chain.stages.size()) throw ContractViolation("chain: wrong ParamSet size");
  Vector cur(x.begin(), x.end());
  Vector next;
  for (std::size_t i = 0; i < chain.stages.size(); ++i) {
    next.assign(chain.stages[i].output_dim, 0.0);
    stage_forward_into(chain.stages[i], cur, params[i], next);
    cur.swap(next);
  }
  return cur.at(0);
}

ChainGradients chain_backprop(const ModelChain& chain, ConstView x, const ParamSet& params) {
  if (params.size() != chain.stages.size()) throw ContractViolation("chain: wrong ParamSet size");
  const std::size_t n = chain.stages.size();
  std::vector<Vector> inputs(n);
  Vector cur(x.begin(), x.end());
  for (std::size_t i = 0; i < n; ++i) {
    inputs[i] = cur;
    cur = stage_forward(chain.stages[i], inputs[i], params[i]);
  }
  ChainGradients g;
  g.loss = cur.at(0);
  g.weight.resize(n);
  g.input.resize(n);
  Vector v{1.0};
  for (std::size_t i = n; i-- > 0;) {
    g.weight[i] = stage_backward_weight(chain.stages[i], inputs[i], params[i], v);
    g.input[i] = stage_backward_input(chain.stages[i], inputs[i], params[i], v);
    v = g.input[i];
  }
  return g;
}

ParamSet zero_params(const ModelChain& chain) {
  ParamSet p;
  p.reserve(chain.stages.size());
  for (const auto& s : chain.stages) p.emplace_back(s.param_dim, 0.0);
  return p;
}

ParamSet random_params(const ModelChain& chain, RngStream& rng, double scale) {
  ParamSet p = zero_params(chain);
  for (auto& w : p)
    for (double& v : w) v = rng.normal(0.0, scale);
  return p;
}

WorkerOperator::WorkerOperator(const ModelChain& chain, std::size_t worker) : chain_(&chain) {
  auto [f, l] = chain.worker_stages(worker);
  first_ = f;
  last_ = l;
}

std::size_t WorkerOperator::input_dim() const { return chain_->stages[first_].input_dim; }
std::size_t WorkerOperator::output_dim() const { return chain_->stages[last_ - 1].output_dim; }

WorkerOperator::Tape WorkerOperator::make_tape() const {
  Tape t;
  for (std::size_t i = first_; i < last_; ++i) t.inputs.emplace_back(chain_->stages[i].input_dim);
  t.output.assign(output_dim(), 0.0);
  return t;
}

ConstView WorkerOperator::forward(ConstView y_in, const ParamSet& params, Tape& tape) const {
  if (y_in.size() != input_dim()) throw ContractViolation("worker: input length mismatch");
  std::copy(y_in.begin(), y_in.end(), tape.inputs[0].begin());
  for (std::size_t i = first_; i < last_; ++i) {
    const std::size_t k = i - first_;
    MutView out = (i + 1 < last_) ? MutView(tape.inputs[k + 1]) : MutView(tape.output);
    stage_forward_into(chain_->stages[i], tape.inputs[k], params[i], out);
  }
  return tape.output;
}

void WorkerOperator::backward(const Tape& tape, const ParamSet& params, ConstView v_out,
                              MutView v_in, ParamSet& grads, double scale) const {
  if (v_out.size() != output_dim()) throw ContractViolation("worker: v_out length mismatch");
  Vector v(v_out.begin(), v_out.end());
  Vector prev;
  for (std::size_t i = last_; i-- > first_;) {
    const std::size_t k = i - first_;
    const auto& s = chain_->stages[i];
    if (s.param_dim) stage_backward_weight_accumulate(s, tape.inputs[k], params[i], v, scale, grads[i]);
    if (i == first_ && v_in.empty()) break;
    prev.assign(s.input_dim, 0.0);
    stage_backward_input_into(s, tape.inputs[k], params[i], v, prev);
    v.swap(prev);
  }
  if (!v_in.empty()) {
    if (v_in.size() != input_dim()) throw ContractViolation("worker: v_in length mismatch");
    std::copy(v.begin(), v.end(), v_in.begin());
  }
}

}  // namespace clapping::math
