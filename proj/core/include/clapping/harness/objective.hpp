#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "clapping/math/chain.hpp"

namespace clapping::harness {

/// Mean loss over every row, and the norm of the full gradient.
struct FullEval {
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// Evaluates the chain on all rows, ignoring the worker partition.
class FullObjective {
 public:
  FullObjective(const math::ModelChain& chain, const math::Batch& rows);
  FullEval evaluate(const math::ParamSet& params, bool with_gradient = true) const;
  /// Full gradient, per stage.
  math::ParamSet gradient(const math::ParamSet& params) const;

 private:
  math::ModelChain flat_;
  const math::Batch* rows_;
};

struct FStarOptions {
  double grad_tol = 1e-10;
  std::uint64_t max_iters = 1000000;
  bool use_cache = true;
  /// Overrides CLAPPING_SIM_CACHE_DIR and the default cache location.
  std::optional<std::filesystem::path> cache_dir;
};

struct FStarResult {
  double f_star = 0.0;
  double grad_norm = 0.0;
  std::uint64_t iterations = 0;
  bool from_cache = false;
};

/// Minimizes mean softplus(x̃ᵀw̃) + C_r‖w̃‖² over the folded rows by full-batch
/// gradient descent with step 1/L, L = λ_max(X̃ᵀX̃)/(4n) + 2C_r, until the
/// gradient norm reaches `grad_tol`. Results are cached on disk keyed by a
/// hash of the rows and C_r. Throws ConvergenceError when the budget runs out.
FStarResult compute_f_star(const math::Batch& folded_rows, double reg_weight, const FStarOptions& opts = {});

/// The directory used for the f* cache, if any.
std::optional<std::filesystem::path> default_cache_dir();

}  // namespace clapping::harness
