#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "clapping/math/vector.hpp"

namespace clapping::math {

enum class StageKind { Linear, AffineBias, Tanh, ReLU, LogisticLossHead, RegularizedLogisticHead };

std::string_view to_string(StageKind kind);
StageKind parse_stage_kind(std::string_view name);

struct StageExtra {
  /// Regularization weight C_r of RegularizedLogisticHead.
  double reg_weight = 0.0;
  /// Linear only: append ‖w‖² as one extra output so that a downstream
  /// RegularizedLogisticHead can charge the penalty without holding state.
  bool emit_param_sq_norm = false;
};

/// One operator y_out = a(y_in, w).
///
/// Parameter layouts: Linear stores W row-major (output by input).
/// AffineBias stores W row-major followed by the bias b. Linear with
/// `emit_param_sq_norm` has output_dim = rows(W) + 1. RegularizedLogisticHead
/// takes (z, s) and returns softplus(z) + C_r·s.
struct StageSpec {
  StageKind kind = StageKind::Linear;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t param_dim = 0;
  StageExtra extra;

  static StageSpec linear(std::size_t in, std::size_t out, bool emit_param_sq_norm = false);
  static StageSpec affine_bias(std::size_t in, std::size_t out);
  static StageSpec tanh(std::size_t dim);
  static StageSpec relu(std::size_t dim);
  static StageSpec logistic_loss_head();
  static StageSpec regularized_logistic_head(double reg_weight);

  /// Rows of the weight matrix for Linear/AffineBias.
  std::size_t weight_rows() const;

  /// Throws ContractViolation when dims, param_dim and kind disagree.
  void validate() const;
};

Vector stage_forward(const StageSpec& stage, ConstView y_in, ConstView w);
void stage_forward_into(const StageSpec& stage, ConstView y_in, ConstView w, MutView y_out);

/// ∇₁a(y_in, w)ᵀ v_out.
Vector stage_backward_input(const StageSpec& stage, ConstView y_in, ConstView w, ConstView v_out);
void stage_backward_input_into(const StageSpec& stage, ConstView y_in, ConstView w, ConstView v_out,
                               MutView v_in);

/// ∇₂a(y_in, w)ᵀ v_out. Empty for parameter-free stages.
Vector stage_backward_weight(const StageSpec& stage, ConstView y_in, ConstView w, ConstView v_out);
/// grad += scale · ∇₂a(y_in, w)ᵀ v_out.
void stage_backward_weight_accumulate(const StageSpec& stage, ConstView y_in, ConstView w,
                                      ConstView v_out, double scale, MutView grad);

/// Upper bound on the Lipschitz constant of y_in ↦ a(y_in, w): the spectral
/// norm of W for Linear/AffineBias, 1 for Tanh/ReLU, and the input-gradient
/// bound for loss heads.
double stage_input_lipschitz(const StageSpec& stage, ConstView w);

double softplus(double z);
double sigmoid(double z);

}  // namespace clapping::math
