#include "clapping/engine/optimizer.hpp"

#include <cmath>

#include "clapping/error.hpp"

namespace clapping::engine {

void OptimizerConfig::validate() const {
  if (!(lr.min_value() > 0.0)) throw ConfigError("step size must be > 0", "algo.lr");
  if (kind == OptimizerKind::MomentumSGD) {
    if (!(momentum.min_value() > 0.0) || momentum.max_value() > 1.0)
      throw ConfigError("momentum weight m_t must lie in (0,1]", "algo.momentum");
  } else {
    if (!(beta1 > 0.0 && beta1 <= 1.0)) throw ConfigError("beta1 must lie in (0,1]", "algo.beta1");
    if (!(beta2 > 0.0 && beta2 <= 1.0)) throw ConfigError("beta2 must lie in (0,1]", "algo.beta2");
    if (!(eps >= 0.0)) throw ConfigError("eps must be >= 0", "algo.eps");
  }
}

void momentum_update(math::MutView u, math::MutView w, math::ConstView g, double m, double lr) {
  if (u.size() != w.size() || g.size() != w.size()) throw ContractViolation("momentum_update: length mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    u[i] = (1.0 - m) * u[i] + m * g[i];
    w[i] -= lr * u[i];
  }
}

void adam_update(math::MutView u, math::MutView v, math::MutView w, math::ConstView g, double beta1,
                 double beta2, double eps, double lr) {
  if (u.size() != w.size() || v.size() != w.size() || g.size() != w.size())
    throw ContractViolation("adam_update: length mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    u[i] = (1.0 - beta1) * u[i] + beta1 * g[i];
    v[i] = (1.0 - beta2) * v[i] + beta2 * g[i] * g[i];
    const double denom = std::sqrt(v[i] + eps);
    // 0/0 only arises when g, ũ and υ are all zero, so there is nothing to step.
    if (denom > 0.0) w[i] -= lr * u[i] / denom;
  }
}

}  // namespace clapping::engine
