#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinydl/tensor.hpp"

namespace tinydl {

enum class OptimizerKind { gradient_descent, adaptive };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// Learning rate, step counter and (for the adaptive rule) one squared-
/// gradient accumulator per parameter tensor.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::gradient_descent;
  double learning_rate = 0.01;
  double reg_strength = 0.0;
  double epsilon = 1e-8;
  std::uint64_t iteration = 0;
  std::vector<Tensor> accumulators;
};

/// w <- w - lr * grad.
void gd_step(const OptimizerState& state, Tensor& w, const Tensor& grad);

/// acc <- acc + grad^2; w <- w - lr * grad / sqrt(acc + eps).
void adaptive_step(OptimizerState& state, std::size_t slot, Tensor& w, const Tensor& grad);

/// One optimization step over every parameter: dispatches on the kind,
/// allocates accumulators on first use and increments the iteration counter
/// once.
void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor> grads);

struct BatchPlan {
  std::size_t batch_size = 32;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

/// Partition of [0, n) into batches for one epoch. The order is a pure
/// function of (plan.seed, epoch); the final batch may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, const BatchPlan& plan,
                                                   std::size_t epoch = 0);

}  // namespace tinydl
