#include "clapping/math/stage.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace clapping::math {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

void check_call(const StageSpec& s, ConstView y_in, ConstView w) {
  if (y_in.size() != s.input_dim)
    throw ContractViolation("stage: input length " + std::to_string(y_in.size()) + " != input_dim " +
                            std::to_string(s.input_dim));
  if (w.size() != s.param_dim)
    throw ContractViolation("stage: parameter length " + std::to_string(w.size()) +
                            " != param_dim " + std::to_string(s.param_dim));
}

void check_out(const StageSpec& s, std::size_t n) {
  if (n != s.output_dim)
    throw ContractViolation("stage: output length " + std::to_string(n) + " != output_dim " +
                            std::to_string(s.output_dim));
}

}  // namespace

std::string_view to_string(StageKind kind) {
  switch (kind) {
    case StageKind::Linear: return "linear";
    case StageKind::AffineBias: return "affine_bias";
    case StageKind::Tanh: return "tanh";
    case StageKind::ReLU: return "relu";
    case StageKind::LogisticLossHead: return "logistic_loss_head";
    case StageKind::RegularizedLogisticHead: return "regularized_logistic_head";
  }
  return "?";
}

StageKind parse_stage_kind(std::string_view name) {
  for (auto k : {StageKind::Linear, StageKind::AffineBias, StageKind::Tanh, StageKind::ReLU,
                 StageKind::LogisticLossHead, StageKind::RegularizedLogisticHead})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown stage kind '" + std::string(name) + "'");
}

double softplus(double z) {
  // log(1 + e^z) without overflow for large |z|.
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

StageSpec StageSpec::linear(std::size_t in, std::size_t out, bool emit_param_sq_norm) {
  StageSpec s;
  s.kind = StageKind::Linear;
  s.input_dim = in;
  s.output_dim = out + (emit_param_sq_norm ? 1 : 0);
  s.param_dim = in * out;
  s.extra.emit_param_sq_norm = emit_param_sq_norm;
  s.validate();
  return s;
}

StageSpec StageSpec::affine_bias(std::size_t in, std::size_t out) {
  StageSpec s;
  s.kind = StageKind::AffineBias;
  s.input_dim = in;
  s.output_dim = out;
  s.param_dim = in * out + out;
  s.validate();
  return s;
}

StageSpec StageSpec::tanh(std::size_t dim) {
  StageSpec s;
  s.kind = StageKind::Tanh;
  s.input_dim = s.output_dim = dim;
  s.validate();
  return s;
}

StageSpec StageSpec::relu(std::size_t dim) {
  StageSpec s;
  s.kind = StageKind::ReLU;
  s.input_dim = s.output_dim = dim;
  s.validate();
  return s;
}

StageSpec StageSpec::logistic_loss_head() {
  StageSpec s;
  s.kind = StageKind::LogisticLossHead;
  s.input_dim = 1;
  s.output_dim = 1;
  return s;
}

StageSpec StageSpec::regularized_logistic_head(double reg_weight) {
  StageSpec s;
  s.kind = StageKind::RegularizedLogisticHead;
  s.input_dim = 2;
  s.output_dim = 1;
  s.extra.reg_weight = reg_weight;
  s.validate();
  return s;
}

std::size_t StageSpec::weight_rows() const {
  if (kind == StageKind::Linear) return output_dim - (extra.emit_param_sq_norm ? 1 : 0);
  if (kind == StageKind::AffineBias) return output_dim;
  return 0;
}

void StageSpec::validate() const {
  require(input_dim > 0 && output_dim > 0, "stage: dims must be positive");
  switch (kind) {
    case StageKind::Linear:
      require(!extra.emit_param_sq_norm || output_dim >= 2, "linear: emit_param_sq_norm needs a row");
      require(param_dim == input_dim * weight_rows(), "linear: param_dim must be input_dim*rows");
      break;
    case StageKind::AffineBias:
      require(param_dim == input_dim * output_dim + output_dim,
              "affine_bias: param_dim must be input_dim*output_dim+output_dim");
      break;
    case StageKind::Tanh:
    case StageKind::ReLU:
      require(input_dim == output_dim, "activation: input_dim must equal output_dim");
      require(param_dim == 0, "activation: param_dim must be 0");
      break;
    case StageKind::LogisticLossHead:
      require(input_dim == 1 && output_dim == 1 && param_dim == 0,
              "logistic_loss_head: dims must be 1 -> 1 with no parameters");
      break;
    case StageKind::RegularizedLogisticHead:
      require(input_dim == 2 && output_dim == 1 && param_dim == 0,
              "regularized_logistic_head: dims must be 2 -> 1 with no parameters");
      require(std::isfinite(extra.reg_weight) && extra.reg_weight >= 0.0,
              "regularized_logistic_head: reg_weight must be finite and >= 0");
      break;
  }
}

void stage_forward_into(const StageSpec& s, ConstView y, ConstView w, MutView out) {
  check_call(s, y, w);
  check_out(s, out.size());
  const std::size_t in = s.input_dim;
  switch (s.kind) {
    case StageKind::Linear:
    case StageKind::AffineBias: {
      const std::size_t rows = s.weight_rows();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w.data() + r * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * y[c];
        if (s.kind == StageKind::AffineBias) acc += w[rows * in + r];
        out[r] = acc;
      }
      if (s.kind == StageKind::Linear && s.extra.emit_param_sq_norm) out[rows] = squared_norm(w);
      break;
    }
    case StageKind::Tanh:
      for (std::size_t i = 0; i < in; ++i) out[i] = std::tanh(y[i]);
      break;
    case StageKind::ReLU:
      for (std::size_t i = 0; i < in; ++i) out[i] = y[i] > 0.0 ? y[i] : 0.0;
      break;
    case StageKind::LogisticLossHead:
      out[0] = softplus(y[0]);
      break;
    case StageKind::RegularizedLogisticHead:
      out[0] = softplus(y[0]) + s.extra.reg_weight * y[1];
      break;
  }
}

Vector stage_forward(const StageSpec& s, ConstView y, ConstView w) {
  Vector out(s.output_dim);
  stage_forward_into(s, y, w, out);
  return out;
}

void stage_backward_input_into(const StageSpec& s, ConstView y, ConstView w, ConstView v,
                               MutView v_in) {
  check_call(s, y, w);
  check_out(s, v.size());
  if (v_in.size() != s.input_dim) throw ContractViolation("stage: v_in length != input_dim");
  const std::size_t in = s.input_dim;
  switch (s.kind) {
    case StageKind::Linear:
    case StageKind::AffineBias: {
      // The emitted ‖w‖² row does not depend on the input.
      const std::size_t rows = s.weight_rows();
      std::fill(v_in.begin(), v_in.end(), 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w.data() + r * in;
        const double vr = v[r];
        for (std::size_t c = 0; c < in; ++c) v_in[c] += wr[c] * vr;
      }
      break;
    }
    case StageKind::Tanh:
      for (std::size_t i = 0; i < in; ++i) {
        const double t = std::tanh(y[i]);
        v_in[i] = (1.0 - t * t) * v[i];
      }
      break;
    case StageKind::ReLU:
      for (std::size_t i = 0; i < in; ++i) v_in[i] = y[i] > 0.0 ? v[i] : 0.0;
      break;
    case StageKind::LogisticLossHead:
      v_in[0] = sigmoid(y[0]) * v[0];
      break;
    case StageKind::RegularizedLogisticHead:
      v_in[0] = sigmoid(y[0]) * v[0];
      v_in[1] = s.extra.reg_weight * v[0];
      break;
  }
}

Vector stage_backward_input(const StageSpec& s, ConstView y, ConstView w, ConstView v) {
  Vector v_in(s.input_dim);
  stage_backward_input_into(s, y, w, v, v_in);
  return v_in;
}

void stage_backward_weight_accumulate(const StageSpec& s, ConstView y, ConstView w, ConstView v,
                                      double scale, MutView grad) {
  check_call(s, y, w);
  check_out(s, v.size());
  if (grad.size() != s.param_dim) throw ContractViolation("stage: grad length != param_dim");
  if (s.kind != StageKind::Linear && s.kind != StageKind::AffineBias) return;
  const std::size_t in = s.input_dim;
  const std::size_t rows = s.weight_rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const double vr = scale * v[r];
    double* gr = grad.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) gr[c] += vr * y[c];
    if (s.kind == StageKind::AffineBias) grad[rows * in + r] += vr;
  }
  if (s.kind == StageKind::Linear && s.extra.emit_param_sq_norm) {
    const double vn = 2.0 * scale * v[rows];
    for (std::size_t i = 0; i < s.param_dim; ++i) grad[i] += vn * w[i];
  }
}

Vector stage_backward_weight(const StageSpec& s, ConstView y, ConstView w, ConstView v) {
  Vector g(s.param_dim, 0.0);
  stage_backward_weight_accumulate(s, y, w, v, 1.0, g);
  return g;
}

double stage_input_lipschitz(const StageSpec& s, ConstView w) {
  if (w.size() != s.param_dim) throw ContractViolation("stage: parameter length != param_dim");
  switch (s.kind) {
    case StageKind::Linear:
    case StageKind::AffineBias: {
      const auto rows = static_cast<Eigen::Index>(s.weight_rows());
      const auto cols = static_cast<Eigen::Index>(s.input_dim);
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
          w.data(), rows, cols);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    }
    case StageKind::Tanh:
    case StageKind::ReLU:
    case StageKind::LogisticLossHead:
      return 1.0;
    case StageKind::RegularizedLogisticHead:
      return std::sqrt(1.0 + s.extra.reg_weight * s.extra.reg_weight);
  }
  return 1.0;
}

}  // namespace clapping::math
