#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "clapping/math/stage.hpp"
#include "clapping/rng.hpp"

namespace clapping::math {

/// Per-stage parameter vectors, one entry per stage (empty for
/// parameter-free stages).
using ParamSet = std::vector<Vector>;

/// Stages composed into a scalar loss and partitioned across workers.
///
/// `boundaries[b]` is the index of the first stage owned by worker b+1, so a
/// chain with E workers has E-1 boundaries. Workers and boundaries are
/// 0-based: boundary b sits between worker b and worker b+1.
struct ModelChain {
  std::vector<StageSpec> stages;
  std::vector<std::size_t> boundaries;

  void validate() const;

  std::size_t num_workers() const { return boundaries.size() + 1; }
  std::size_t num_boundaries() const { return boundaries.size(); }
  /// Half-open stage range [first, second) owned by `worker`.
  std::pair<std::size_t, std::size_t> worker_stages(std::size_t worker) const;
  /// Length of the activation crossing boundary b.
  std::size_t boundary_dim(std::size_t b) const;
  std::size_t input_dim() const { return stages.front().input_dim; }
  std::size_t total_params() const;
};

double chain_loss(const ModelChain& chain, ConstView x, const ParamSet& params);

struct ChainGradients {
  double loss = 0.0;
  /// ∂L/∂w for every stage.
  ParamSet weight;
  /// ∂L/∂y_in for every stage (index i holds the gradient at stage i's input).
  std::vector<Vector> input;
};

/// Exact backpropagation with v = 1 at the loss.
ChainGradients chain_backprop(const ModelChain& chain, ConstView x, const ParamSet& params);

ParamSet zero_params(const ModelChain& chain);
/// Entries i.i.d. Normal(0, scale²), drawn stage by stage.
ParamSet random_params(const ModelChain& chain, RngStream& rng, double scale);

}  // namespace clapping::math
