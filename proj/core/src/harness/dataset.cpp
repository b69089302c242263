#include "clapping/harness/dataset.hpp"

#include <bit>
#include <cmath>

#include "clapping/error.hpp"
#include "clapping/rng.hpp"

namespace clapping::harness {

LabeledDataset gen_logistic_dataset(const LogisticDatasetSpec& spec) {
  if (spec.n == 0 || spec.dim == 0) throw ConfigError("n and dim must be >= 1", "dataset");
  if (!(spec.feature_var >= 0.0) || !(spec.noise_var >= 0.0))
    throw ConfigError("feature and noise spreads must be >= 0", "dataset");
  const double sf = spec.params_are_stddev ? spec.feature_var : std::sqrt(spec.feature_var);
  const double sn = spec.params_are_stddev ? spec.noise_var : std::sqrt(spec.noise_var);

  RngStream truth_rng(spec.seed, "data/truth");
  RngStream feat_rng(spec.seed, "data/features");
  RngStream noise_rng(spec.seed, "data/noise");

  math::Vector w0(spec.dim);
  for (double& v : w0) v = truth_rng.normal(0.0, 1.0);
  const double b0 = truth_rng.normal(0.0, 1.0);

  LabeledDataset out{math::Batch(spec.n, spec.dim), std::vector<int>(spec.n)};
  math::Vector clean(spec.dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = out.features.row(i);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      clean[j] = feat_rng.normal(0.0, sf);
      row[j] = clean[j] + noise_rng.normal(0.0, sn);
    }
    out.labels[i] = math::dot(clean, w0) + b0 >= 0.0 ? 1 : -1;
  }
  return out;
}

math::Batch fold_labels(const LabeledDataset& data, bool append_bias) {
  const std::size_t n = data.features.rows();
  const std::size_t d = data.features.cols();
  if (data.labels.size() != n) throw ContractViolation("fold_labels: label count mismatch");
  math::Batch out(n, d + (append_bias ? 1 : 0));
  for (std::size_t i = 0; i < n; ++i) {
    const double s = -static_cast<double>(data.labels[i]);
    const auto src = data.features.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = s * src[j];
    if (append_bias) dst[d] = s;
  }
  return out;
}

math::ModelChain logistic_chain(std::size_t dim, double reg_weight) {
  math::ModelChain c;
  c.stages = {math::StageSpec::linear(dim + 1, 1, true), math::StageSpec::regularized_logistic_head(reg_weight)};
  c.boundaries = {1};
  c.validate();
  return c;
}

math::ModelChain mlp_chain(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t workers) {
  if (workers < 1) throw ConfigError("workers must be >= 1", "model.workers");
  math::ModelChain c;
  // Layer k = Linear followed by Tanh; the output layer is Linear + head.
  std::vector<std::size_t> layer_start;
  std::size_t prev = input_dim;
  for (std::size_t h : hidden) {
    layer_start.push_back(c.stages.size());
    c.stages.push_back(math::StageSpec::linear(prev, h));
    c.stages.push_back(math::StageSpec::tanh(h));
    prev = h;
  }
  layer_start.push_back(c.stages.size());
  c.stages.push_back(math::StageSpec::linear(prev, 1));
  c.stages.push_back(math::StageSpec::logistic_loss_head());
  const std::size_t layers = layer_start.size();
  if (workers > layers)
    throw ConfigError("more workers (" + std::to_string(workers) + ") than layers (" + std::to_string(layers) + ")",
                      "model.workers");
  for (std::size_t w = 1; w < workers; ++w) c.boundaries.push_back(layer_start[w * layers / workers]);
  c.validate();
  return c;
}

LabeledDataset gen_mlp_dataset(const MLPDatasetSpec& spec) {
  if (spec.n == 0 || spec.dim == 0) throw ConfigError("n and dim must be >= 1", "dataset");
  const auto teacher = mlp_chain(spec.dim, spec.hidden, 1);
  RngStream truth_rng(spec.seed, "data/truth");
  RngStream feat_rng(spec.seed, "data/features");
  math::ParamSet w = math::zero_params(teacher);
  for (std::size_t i = 0; i < teacher.stages.size(); ++i) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(teacher.stages[i].input_dim));
    for (double& v : w[i]) v = truth_rng.normal(0.0, sd);
  }
  LabeledDataset out{math::Batch(spec.n, spec.dim), std::vector<int>(spec.n)};
  // Score the teacher's pre-head output by evaluating the chain up to the head.
  math::ModelChain body = teacher;
  body.stages.pop_back();
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = out.features.row(i);
    for (double& v : row) v = feat_rng.normal(0.0, 1.0);
    math::Vector cur(row.begin(), row.end());
    for (std::size_t s = 0; s < body.stages.size(); ++s) cur = math::stage_forward(body.stages[s], cur, w[s]);
    out.labels[i] = cur[0] >= 0.0 ? 1 : -1;
  }
  return out;
}

std::uint64_t dataset_hash(const math::Batch& rows, double extra) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(rows.rows());
  mix(rows.cols());
  for (double v : rows.data()) mix(std::bit_cast<std::uint64_t>(v));
  mix(std::bit_cast<std::uint64_t>(extra));
  return h;
}

}  // namespace clapping::harness
