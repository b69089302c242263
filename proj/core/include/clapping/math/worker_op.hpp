#pragma once

#include <cstddef>
#include <vector>

#include "clapping/math/chain.hpp"

namespace clapping::math {

/// The composed operator of one worker, i.e. a contiguous range of stages.
///
/// `forward` records every intermediate input on a tape; `backward` replays the
/// tape so that input and weight gradients are taken at the same point the
/// forward pass used.
class WorkerOperator {
 public:
  struct Tape {
    std::vector<Vector> inputs;  // inputs[i] feeds stage first+i
    Vector output;
  };

  WorkerOperator(const ModelChain& chain, std::size_t worker);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t first_stage() const noexcept { return first_; }
  std::size_t last_stage() const noexcept { return last_; }

  Tape make_tape() const;

  /// Runs the stages on `y_in`; returns a view of `tape.output`.
  ConstView forward(ConstView y_in, const ParamSet& params, Tape& tape) const;

  /// Given v_out, writes ∇₁ᵀv_out into `v_in` (skipped when empty) and adds
  /// scale·∇₂ᵀv_out into the per-stage slots of `grads`.
  void backward(const Tape& tape, const ParamSet& params, ConstView v_out, MutView v_in,
                ParamSet& grads, double scale) const;

 private:
  const ModelChain* chain_;
  std::size_t first_;
  std::size_t last_;
};

}  // namespace clapping::math
