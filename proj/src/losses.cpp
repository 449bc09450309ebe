#include "tinydl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tinydl/errors.hpp"

namespace tinydl {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mean_absolute_error: return "mae";
    case LossKind::mean_squared_error: return "mse";
    case LossKind::binary_cross_entropy: return "bce";
    case LossKind::categorical_cross_entropy: return "cce";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mae" || name == "mean_absolute_error") return LossKind::mean_absolute_error;
  if (name == "mse" || name == "mean_squared_error") return LossKind::mean_squared_error;
  if (name == "bce" || name == "binary_cross_entropy") return LossKind::binary_cross_entropy;
  if (name == "cce" || name == "categorical_cross_entropy") return LossKind::categorical_cross_entropy;
  throw ConfigError("unknown loss kind '" + name + "'");
}

LossValue loss(LossKind kind, const Tensor& p, const Tensor& t) {
  require_same_shape(p, t, "loss");
  LossValue out{0.0, Tensor(p.shape())};
  const double n = static_cast<double>(p.size());
  switch (kind) {
    case LossKind::mean_absolute_error:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        out.value += std::abs(d);
        out.grad[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
      }
      out.value /= n;
      break;
    case LossKind::mean_squared_error:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        out.value += d * d;
        out.grad[i] = 2.0 * d / n;
      }
      out.value /= n;
      break;
    case LossKind::binary_cross_entropy:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
        out.value -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
        out.grad[i] = (-t[i] / q + (1.0 - t[i]) / (1.0 - q)) / n;
      }
      out.value /= n;
      break;
    case LossKind::categorical_cross_entropy: {
      const double positions = n / static_cast<double>(p.extent(0));
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (t[i] == 0.0) continue;
        const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
        out.value -= t[i] * std::log(q);
        out.grad[i] = -t[i] / q / positions;
      }
      out.value /= positions;
      break;
    }
  }
  return out;
}

L2Penalty l2_penalty(std::span<const Tensor* const> weights, double strength) {
  if (!(strength >= 0.0)) throw ConfigError("regularization strength must be non-negative");
  L2Penalty out;
  out.grads.reserve(weights.size());
  for (const Tensor* w : weights) {
    out.value += sum_squares(*w);
    out.grads.push_back(scale(*w, 2.0 * strength));
  }
  out.value *= strength;
  return out;
}

}  // namespace tinydl
