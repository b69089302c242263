#pragma once

#include "clapping/engine/schedule.hpp"
#include "clapping/math/vector.hpp"

namespace clapping::engine {

enum class OptimizerKind { MomentumSGD, Adam };

/// MomentumSGD: ũ ← (1−m_t)ũ + m_t·g, w ← w − γ_t ũ.
/// Adam: ũ ← (1−β₁)ũ + β₁g, υ ← (1−β₂)υ + β₂g², w ← w − γ_t ũ/√(υ+ε), with no
/// bias correction and no weight decay.
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::MomentumSGD;
  Schedule lr{0.1};
  Schedule momentum{1.0};
  double beta1 = 0.1;
  double beta2 = 0.001;
  double eps = 1e-8;

  void validate() const;
};

void momentum_update(math::MutView u, math::MutView w, math::ConstView grad, double m, double lr);
void adam_update(math::MutView u, math::MutView v, math::MutView w, math::ConstView grad, double beta1,
                 double beta2, double eps, double lr);

}  // namespace clapping::engine
