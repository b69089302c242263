#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "clapping/compress/compressor.hpp"
#include "clapping/engine/engine.hpp"
#include "clapping/math/chain.hpp"

namespace clapping::verify {

struct CaseResult {
  std::string name;
  double deviation = 0.0;
  bool pass = true;
  std::string detail;
};

/// Outcome of one suite. `pass` is true iff max_deviation ≤ tolerance. An
/// advisory report is informational and never fails a run on its own.
struct CheckReport {
  std::string suite;
  std::size_t cases = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  bool advisory = false;
  std::vector<CaseResult> diagnostics;

  /// Records a case and folds it into the running maximum.
  void add(CaseResult c);
  void finish();
};

std::string to_json(const CheckReport& report);

/// Central-difference check of stage_backward_input and
/// stage_backward_weight against ⟨v, a(y, w)⟩ for random y, w, v. The relative
/// error per trial is ‖g − fd‖ / max(‖g‖, ‖fd‖, 1e-3).
CheckReport check_stage_gradients(const math::StageSpec& stage, std::size_t trials, double h, double tol,
                                  std::uint64_t seed);

/// Backpropagated weight gradients and stage-input gradients of the whole
/// chain against central differences of chain_loss. For chains with ReLU,
/// trials whose pre-activations come within 1e-2 of a kink are redrawn.
CheckReport check_chain_gradients(const math::ModelChain& chain, std::size_t trials, double h, double tol,
                                  std::uint64_t seed);

/// With the target y frozen, iterates ỹ ← ỹ + C(y − ỹ) from ỹ = 0 and checks
/// err_t ≤ ω·err_{t−1} + 1e-12 with ω² = contraction_bound. Each case also
/// reports the first step at which the error is exactly zero, if any.
CheckReport check_ef_decay(const compress::CompressorSpec& spec, std::size_t dim, std::size_t steps,
                           std::size_t targets, std::uint64_t seed);

/// Contraction certification of one compressor: the empirical worst-case
/// ratio must not exceed the certified bound (plus 1e-12).
CheckReport check_contraction(const compress::CompressorSpec& spec, std::size_t dim, std::size_t trials,
                              std::uint64_t seed);

struct EquivalenceSetup {
  math::ModelChain chain;
  std::shared_ptr<const engine::DataSource> data;
  math::ParamSet initial_params;
  engine::AlgoConfig base;
};

/// Runs NoComp and each listed variant in lock step from the same seed, with
/// `compressor` on every boundary and p = 1, and compares weights after
/// every step. Pass iff the max deviation stays within `tol`.
CheckReport check_identity_equivalence(const EquivalenceSetup& setup, const std::vector<engine::Variant>& variants,
                                       const compress::CompressorSpec& compressor, std::uint64_t steps, double tol);

/// Measured constants for one error-propagation trial.
struct PropagationConstants {
  double lipschitz_a = 0.0;         // L_a
  double lipschitz_jacobian = 0.0;  // L°
  double lipschitz_secant = 0.0;    // L'
};

/// One compressed forward/backward pass (error feedback from random cache
/// states) against an uncompressed shadow pass on the same weights, checking
///
///   ‖ỹ_e − ŷ_e‖² ≤ Σ_{ι≤e} 2(2L_a²)^{e−ι} ‖ỹ_ι − y_ι‖²
///   ‖ṽ_e − v̂_e‖² ≤ 2 Σ_{ι=e}^{E−1} (2L°²)^{ι−e} ‖ṽ_ι − v_ι‖²
///                 + 4L'² Σ_ι Σ_{s≥max(e,ι)} (2L°²)^{s−e} (2L_a²)^{s−ι} ‖ỹ_ι − y_ι‖²
///
/// with L_a the product of stage Lipschitz bounds, L° = √2‖J‖ and L' the
/// secant constant of the Jacobian-vector map, measured per trial. Pass iff
/// every LHS ≤ (1 + tol_factor)·(RHS + 1e-24). Chains containing ReLU are
/// reported as advisory.
CheckReport check_error_propagation(const math::ModelChain& chain,
                                    const std::vector<engine::BoundaryCompressors>& compressors, std::size_t trials,
                                    double tol_factor, std::uint64_t seed, double weight_scale = 0.7);

/// Lazy-sampling refresh frequency over t = 2..steps against p, within
/// tol_sigmas·sqrt(p(1−p)/(steps−1)); exact for p ∈ {0, 1}. Also checks that
/// t = 1 is always fresh.
CheckReport check_sampler_stats(double p, std::uint64_t steps, double tol_sigmas, std::uint64_t seed,
                                engine::SamplingRule rule = engine::SamplingRule::SingleSample,
                                std::size_t batch_size = 1);

}  // namespace clapping::verify
