#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "clapping/math/chain.hpp"

namespace clapping::harness {

/// ξ = ξ* + ε with ξ*ᵢ ~ N(0, feature_var) and εᵢ ~ N(0, noise_var). The
/// second parameters are variances unless `params_are_stddev` is set.
/// Labels come from a hidden (w°, b°) with N(0,1) entries:
/// ζ = sign(ξ*ᵀw° + b°), with 0 mapped to +1.
struct LogisticDatasetSpec {
  std::size_t n = 10000;
  std::size_t dim = 200;
  std::uint64_t seed = 1;
  double feature_var = 0.5;
  double noise_var = 0.3;
  bool params_are_stddev = false;
};

struct LabeledDataset {
  math::Batch features;     // n × dim
  std::vector<int> labels;  // ±1
};

LabeledDataset gen_logistic_dataset(const LogisticDatasetSpec& spec);

/// Rows −ζ·[ξ; 1]. With this folding the logistic model is a plain linear
/// map of its input, so y₁ = −ζ(ξᵀw + b) = x̃ᵀ[w; b].
math::Batch fold_labels(const LabeledDataset& data, bool append_bias);

/// Linear(dim+1 → 1, emitting ‖[w; b]‖²) on worker 0 and the regularized
/// logistic head on worker 1. The boundary carries (y₁, ‖w‖² + b²).
math::ModelChain logistic_chain(std::size_t dim, double reg_weight);

/// A bias-free odd network: Linear/Tanh layers of the given widths, then
/// Linear(→1) and a logistic loss head, split after roughly equal numbers of
/// layers across `workers`. Oddness keeps label folding exact.
math::ModelChain mlp_chain(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t workers);

/// Gaussian inputs labelled by the sign of a random teacher MLP of the same
/// shape (teacher weights N(0, 1/fan_in)).
struct MLPDatasetSpec {
  std::size_t n = 4096;
  std::size_t dim = 16;
  std::vector<std::size_t> hidden{16, 16};
  std::uint64_t seed = 1;
};

LabeledDataset gen_mlp_dataset(const MLPDatasetSpec& spec);

/// Stable digest of a folded dataset plus extra scalars, for cache keys.
std::uint64_t dataset_hash(const math::Batch& rows, double extra = 0.0);

}  // namespace clapping::harness
