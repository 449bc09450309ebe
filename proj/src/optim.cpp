#include "tinydl/optim.hpp"

#include <cmath>
#include <numeric>

#include "tinydl/errors.hpp"
#include "tinydl/rng.hpp"

namespace tinydl {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adaptive ? "adaptive" : "gd";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "gd" || name == "sgd" || name == "gradient_descent") return OptimizerKind::gradient_descent;
  if (name == "adaptive" || name == "adagrad") return OptimizerKind::adaptive;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void gd_step(const OptimizerState& state, Tensor& w, const Tensor& grad) {
  require_same_shape(w, grad, "gd_step");
  const double lr = state.learning_rate;
  double* wd = w.raw();
  const double* gd = grad.raw();
  for (std::size_t i = 0; i < w.size(); ++i) wd[i] -= lr * gd[i];
}

void adaptive_step(OptimizerState& state, std::size_t slot, Tensor& w, const Tensor& grad) {
  require_same_shape(w, grad, "adaptive_step");
  if (slot >= state.accumulators.size()) throw StateError("adaptive_step: accumulator not allocated");
  Tensor& acc = state.accumulators[slot];
  require_same_shape(acc, w, "adaptive_step accumulator");
  const double lr = state.learning_rate;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc[i] += grad[i] * grad[i];
    w[i] -= lr * grad[i] / std::sqrt(acc[i] + state.epsilon);
  }
}

void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                    std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer_step: parameter/gradient count mismatch");
  if (!(state.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (state.kind == OptimizerKind::adaptive && state.accumulators.empty()) {
    for (const Tensor* p : params) state.accumulators.emplace_back(p->shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.kind == OptimizerKind::adaptive) adaptive_step(state, i, *params[i], grads[i]);
    else gd_step(state, *params[i], grads[i]);
  }
  ++state.iteration;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, const BatchPlan& plan,
                                                   std::size_t epoch) {
  if (n == 0) throw ConfigError("make_batches: empty dataset");
  if (plan.batch_size < 1 || plan.batch_size > n) {
    throw ConfigError("batch size " + std::to_string(plan.batch_size) + " outside [1, " +
                      std::to_string(n) + "]");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (plan.shuffle) {
    Rng rng(Rng::derive(plan.seed, "epoch-" + std::to_string(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace tinydl
