#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>

#include "clapping/error.hpp"
#include "clapping/harness/dataset.hpp"
#include "clapping/math/chain.hpp"
#include "clapping/math/worker_op.hpp"
#include "clapping/rng.hpp"

using namespace clapping;
using namespace clapping::math;

namespace {

double central_diff(const std::function<double(const Vector&)>& f, Vector x, std::size_t i, double h) {
  x[i] += h;
  const double up = f(x);
  x[i] -= 2 * h;
  return (up - f(x)) / (2 * h);
}

double rel_err(const Vector& a, const Vector& b) {
  return std::sqrt(squared_distance(a, b)) / std::max({norm(a), norm(b), 1e-3});
}

}  // namespace

TEST(Stage, LinearIdentityForward) {
  const auto s = StageSpec::linear(2, 2);
  const Vector eye{1, 0, 0, 1};
  const Vector y{3, -2};
  EXPECT_EQ(stage_forward(s, y, eye), (Vector{3, -2}));
  EXPECT_EQ(stage_backward_input(s, y, eye, Vector{1, 1}), (Vector{1, 1}));
}

TEST(Stage, LogisticHeadAtZero) {
  const auto s = StageSpec::logistic_loss_head();
  EXPECT_NEAR(stage_forward(s, Vector{0.0}, {})[0], std::log(2.0), 1e-15);
}

TEST(Stage, RegularizedHeadScalarOracle) {
  const auto s = StageSpec::regularized_logistic_head(0.005);
  const double out = stage_forward(s, Vector{1.0, 4.0}, {})[0];
  EXPECT_NEAR(out, std::log1p(std::exp(1.0)) + 0.02, 1e-15);
}

TEST(Stage, TanhDerivativeAtZero) {
  const auto s = StageSpec::tanh(1);
  EXPECT_EQ(stage_backward_input(s, Vector{0.0}, {}, Vector{1.0}), (Vector{1.0}));
  EXPECT_TRUE(stage_backward_weight(s, Vector{0.0}, {}, Vector{1.0}).empty());
}

TEST(Stage, ScalarLinearWeightGradient) {
  const auto s = StageSpec::linear(1, 1);
  EXPECT_EQ(stage_backward_weight(s, Vector{3.0}, Vector{2.0}, Vector{1.0}), (Vector{3.0}));
}

TEST(Stage, ReluSubgradientAtZeroIsZero) {
  const auto s = StageSpec::relu(3);
  EXPECT_EQ(stage_backward_input(s, Vector{-1.0, 0.0, 2.0}, {}, Vector{1, 1, 1}), (Vector{0, 0, 1}));
}

TEST(Stage, DimensionMismatchThrows) {
  const auto s = StageSpec::linear(3, 2);
  EXPECT_THROW(stage_forward(s, Vector{1, 2}, Vector(6)), ContractViolation);
  EXPECT_THROW(stage_forward(s, Vector{1, 2, 3}, Vector(5)), ContractViolation);
  EXPECT_THROW(stage_backward_input(s, Vector{1, 2, 3}, Vector(6), Vector{1}), ContractViolation);
}

TEST(Stage, ParamDims) {
  EXPECT_EQ(StageSpec::linear(3, 2).param_dim, 6u);
  EXPECT_EQ(StageSpec::tanh(5).param_dim, 0u);
  EXPECT_EQ(StageSpec::relu(5).param_dim, 0u);
  EXPECT_EQ(StageSpec::logistic_loss_head().output_dim, 1u);
  EXPECT_EQ(StageSpec::regularized_logistic_head(0.1).input_dim, 2u);
  EXPECT_EQ(StageSpec::linear(3, 1, true).output_dim, 2u);
}

TEST(Stage, RandomLinearMatchesFiniteDifferences) {
  RngStream rng(11, "linear-fd");
  const auto s = StageSpec::linear(3, 2);
  Vector w(6), y(3), v(2);
  for (auto& x : w) x = rng.normal(0, 1);
  for (auto& x : y) x = rng.normal(0, 1);
  for (auto& x : v) x = rng.normal(0, 1);
  const auto f = [&](const Vector& yy) { return dot(v, stage_forward(s, yy, w)); };
  Vector fd(3);
  for (std::size_t i = 0; i < 3; ++i) fd[i] = central_diff(f, y, i, 1e-5);
  EXPECT_LT(rel_err(stage_backward_input(s, y, w, v), fd), 1e-6);
}

TEST(Stage, RandomAffineBiasWeightGradientMatchesFiniteDifferences) {
  RngStream rng(12, "affine-fd");
  const auto s = StageSpec::affine_bias(4, 3);
  Vector w(s.param_dim), y(4), v(3);
  for (auto& x : w) x = rng.normal(0, 1);
  for (auto& x : y) x = rng.normal(0, 1);
  for (auto& x : v) x = rng.normal(0, 1);
  const auto f = [&](const Vector& ww) { return dot(v, stage_forward(s, y, ww)); };
  Vector fd(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) fd[i] = central_diff(f, w, i, 1e-5);
  EXPECT_LT(rel_err(stage_backward_weight(s, y, w, v), fd), 1e-6);
}

TEST(Stage, ForwardIsBitReproducible) {
  RngStream rng(13, "pure");
  const auto s = StageSpec::affine_bias(5, 4);
  Vector w(s.param_dim), y(5);
  for (auto& x : w) x = rng.normal(0, 1);
  for (auto& x : y) x = rng.normal(0, 1);
  const auto a = stage_forward(s, y, w);
  const auto b = stage_forward(s, y, w);
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(Stage, SoftplusIsStable) {
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
}

TEST(Chain, TwoStageAtZeroIsLn2) {
  ModelChain c{{StageSpec::linear(3, 1), StageSpec::logistic_loss_head()}, {1}};
  c.validate();
  EXPECT_NEAR(chain_loss(c, Vector{0, 0, 0}, {Vector{1, 0, 0}, {}}), std::log(2.0), 1e-15);
}

TEST(Chain, ValidationRejectsBadShapes) {
  ModelChain mismatch{{StageSpec::linear(3, 2), StageSpec::logistic_loss_head()}, {1}};
  EXPECT_THROW(mismatch.validate(), ContractViolation);
  ModelChain unordered{{StageSpec::linear(2, 2), StageSpec::tanh(2), StageSpec::linear(2, 1),
                        StageSpec::logistic_loss_head()},
                       {2, 1}};
  EXPECT_THROW(unordered.validate(), ContractViolation);
}

TEST(Chain, LogisticModelMatchesScalarOracle) {
  const double cr = 0.005;
  const auto chain = harness::logistic_chain(3, cr);
  const Vector xi{0.3, -1.2, 0.5};
  const int zeta = -1;
  const Vector w{0.7, 0.1, -0.4};
  const double b = 0.25;
  // Folded input −ζ[ξ; 1] against parameters [w; b].
  Vector x{-zeta * xi[0], -zeta * xi[1], -zeta * xi[2], -zeta * 1.0};
  ParamSet p{{w[0], w[1], w[2], b}, {}};
  const double y1 = -zeta * (xi[0] * w[0] + xi[1] * w[1] + xi[2] * w[2] + b);
  const double expected = std::log1p(std::exp(y1)) + cr * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) + cr * b * b;
  EXPECT_NEAR(chain_loss(chain, x, p), expected, 1e-15);
}

TEST(Chain, MlpMatchesFlatReimplementation) {
  const auto chain = harness::mlp_chain(4, {5, 3}, 3);
  RngStream rng(21, "mlp");
  const auto p = random_params(chain, rng, 0.7);
  Vector x(4);
  for (auto& v : x) v = rng.normal(0, 1);
  // Independent flat evaluation: Linear → tanh → Linear → tanh → Linear → softplus.
  auto affine = [](const Vector& W, const Vector& in, std::size_t out) {
    Vector r(out, 0.0);
    for (std::size_t i = 0; i < out; ++i)
      for (std::size_t j = 0; j < in.size(); ++j) r[i] += W[i * in.size() + j] * in[j];
    return r;
  };
  std::vector<Vector> weights;
  for (const auto& w : p)
    if (!w.empty()) weights.push_back(w);
  ASSERT_EQ(weights.size(), 3u);
  Vector h = affine(weights[0], x, 5);
  for (auto& v : h) v = std::tanh(v);
  h = affine(weights[1], h, 3);
  for (auto& v : h) v = std::tanh(v);
  const double z = affine(weights[2], h, 1)[0];
  const double expected = std::log1p(std::exp(z));
  EXPECT_NEAR(chain_loss(chain, x, p), expected, 1e-12);
}

TEST(Chain, BackpropMatchesFiniteDifferences) {
  const auto chain = harness::mlp_chain(4, {6, 5}, 3);
  RngStream rng(22, "bp");
  auto p = random_params(chain, rng, 0.5);
  Vector x(4);
  for (auto& v : x) v = rng.normal(0, 1);
  const auto g = chain_backprop(chain, x, p);
  EXPECT_NEAR(g.loss, chain_loss(chain, x, p), 1e-15);
  for (std::size_t s = 0; s < chain.stages.size(); ++s) {
    Vector fd(p[s].size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double orig = p[s][i];
      p[s][i] = orig + 1e-5;
      const double up = chain_loss(chain, x, p);
      p[s][i] = orig - 1e-5;
      fd[i] = (up - chain_loss(chain, x, p)) / 2e-5;
      p[s][i] = orig;
    }
    if (!fd.empty()) EXPECT_LT(rel_err(g.weight[s], fd), 1e-6) << "stage " << s;
  }
}

TEST(Chain, WorkerOperatorsComposeToChain) {
  const auto chain = harness::mlp_chain(4, {6, 5}, 3);
  RngStream rng(23, "workers");
  const auto p = random_params(chain, rng, 0.5);
  Vector x(4);
  for (auto& v : x) v = rng.normal(0, 1);
  Vector cur = x;
  std::vector<WorkerOperator::Tape> tapes;
  for (std::size_t w = 0; w < chain.num_workers(); ++w) {
    WorkerOperator op(chain, w);
    auto tape = op.make_tape();
    const auto out = op.forward(cur, p, tape);
    cur.assign(out.begin(), out.end());
    tapes.push_back(std::move(tape));
  }
  EXPECT_EQ(cur[0], chain_loss(chain, x, p));

  // Backward through the workers reproduces chain_backprop's input gradient.
  Vector v{1.0};
  auto grads = zero_params(chain);
  for (std::size_t w = chain.num_workers(); w-- > 0;) {
    WorkerOperator op(chain, w);
    Vector vin(op.input_dim());
    op.backward(tapes[w], p, v, vin, grads, 1.0);
    v = vin;
  }
  const auto ref = chain_backprop(chain, x, p);
  EXPECT_LT(max_abs_difference(v, ref.input[0]), 1e-14);
  for (std::size_t s = 0; s < chain.stages.size(); ++s)
    EXPECT_LT(max_abs_difference(grads[s], ref.weight[s]), 1e-14);
}

TEST(Chain, LipschitzOfLinearIsSpectralNorm) {
  const auto s = StageSpec::linear(2, 2);
  EXPECT_NEAR(stage_input_lipschitz(s, Vector{3, 0, 0, -5}), 5.0, 1e-12);
  EXPECT_EQ(stage_input_lipschitz(StageSpec::tanh(3), {}), 1.0);
}
