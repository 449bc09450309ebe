#pragma once

#include <span>
#include <string>
#include <vector>

#include "tinydl/tensor.hpp"

namespace tinydl {

/// mean_absolute_error is the reading of "mean average error" used for the
/// simple binary-classification loss; mean_squared_error is provided for
/// reconstruction losses.
enum class LossKind {
  mean_absolute_error,
  mean_squared_error,
  binary_cross_entropy,
  categorical_cross_entropy,
};

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Cross-entropy predictions are clamped to [kProbClamp, 1 - kProbClamp]
/// before the log.
inline constexpr double kProbClamp = 1e-12;

struct LossValue {
  double value = 0.0;
  Tensor grad;  // d value / d prediction
};

/// MAE and MSE and BCE average over all elements. Categorical cross-entropy
/// sums over the class axis (axis 0) and averages over the remaining
/// positions, so a [C,H,W] prediction is a per-pixel mean.
LossValue loss(LossKind kind, const Tensor& prediction, const Tensor& target);

struct L2Penalty {
  double value = 0.0;
  std::vector<Tensor> grads;  // aligned with the weights passed in
};

/// value = strength * sum w^2, grad = 2 * strength * w. Callers pass weights
/// only; biases are never regularized.
L2Penalty l2_penalty(std::span<const Tensor* const> weights, double strength);

}  // namespace tinydl
