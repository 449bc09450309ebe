#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tinydl/layers.hpp"
#include "tinydl/losses.hpp"

namespace tinydl {

/// Ordered stack of layers with per-layer freeze flags. Adjacent shapes are
/// checked by shape inference as layers are added.
class Network {
 public:
  Network(std::string name, Shape input_shape);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  ~Network() = default;

  /// Appends a layer; throws DimensionError naming the layer index when it
  /// cannot take the current output shape.
  Network& add(std::unique_ptr<Layer> layer);

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  /// Output shape after each layer.
  const std::vector<Shape>& layer_shapes() const { return shapes_; }

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  bool frozen(std::size_t i) const { return frozen_.at(i); }
  void freeze(std::span<const std::size_t> indices);
  void set_frozen(std::size_t i, bool frozen);

  /// Every parameter tensor in layer order; trainable_only skips frozen layers.
  std::vector<Tensor*> parameters(bool trainable_only = false);
  std::vector<const Tensor*> parameters(bool trainable_only = false) const;
  /// Weight (non-bias) tensors of trainable layers, the L2 penalty set.
  std::vector<const Tensor*> regularized_weights() const;
  std::size_t param_count() const;

  std::vector<LayerSpec> specs() const;

  /// FNV-1a over the raw bytes of every parameter.
  std::uint64_t checksum() const;
  std::uint64_t layer_checksum(std::size_t i) const;

 private:
  std::string name_;
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<bool> frozen_;
  std::vector<Shape> shapes_;
};

struct NetForward {
  Tensor output;
  std::vector<LayerCache> caches;
};

struct NetBackward {
  Tensor grad_input;
  /// Per layer, aligned with Layer::params(). Frozen layers report zeros.
  std::vector<std::vector<Tensor>> param_grads;
};

NetForward forward(const Network& net, const Tensor& x, Mode mode, Rng& rng);
/// Consumes the caches of the preceding forward.
NetBackward backward(const Network& net, std::vector<LayerCache>& caches, const Tensor& loss_grad);
/// Inference-mode output.
Tensor predict(const Network& net, const Tensor& x);

/// Flattened view of per-layer gradients matching parameters(trainable_only).
std::vector<Tensor> flatten_grads(const Network& net, NetBackward&& grads, bool trainable_only);

// --- gradient checking ---------------------------------------------------------

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Central differences carry roughly ulp(L) / (2 eps) of rounding noise, so
/// a probe whose gradient magnitude is below noise / tol cannot show a
/// relative error under tol even when the analytic value is exact. Such
/// probes are "unresolved"; they still count towards max_rel_error.
inline constexpr double kRoundoffUlps = 4.0;

struct GradCheckResult {
  double max_rel_error = 0.0;           // over every compared probe
  double resolved_max_rel_error = 0.0;  // over probes above the rounding floor
  bool pass = false;                    // max_rel_error < tol
  std::size_t probes = 0;
  std::size_t skipped = 0;     // probes straddling a kink
  std::size_t unresolved = 0;  // compared probes below the rounding floor
};

/// Central-difference check of analytic gradients for arbitrary parameter
/// tensors. `loss_fn` evaluates the scalar loss at the current parameter
/// values. `signature` describes the branches taken by the latest `loss_fn`
/// call; probes whose +eps or -eps evaluation disagrees with the unperturbed
/// signature (a kink was crossed) are skipped.
/// A non-zero `max_per_tensor` probes an evenly strided subset of each tensor.
GradCheckResult check_gradients(const std::function<double()>& loss_fn,
                                std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                double eps, double tol,
                                const std::function<std::uint64_t()>& signature = {},
                                std::size_t max_per_tensor = 0);

/// Hash of the branch every piecewise layer took in a forward pass (ReLU
/// sides, max-pool winners). A probe that changes it has crossed a kink.
std::uint64_t kink_signature(const Network& net, const std::vector<LayerCache>& caches);

struct GradCheckOptions {
  double eps = 1e-6;
  double tolerance = 1e-5;
  double reg_strength = 0.0;
  std::uint64_t seed = 0;  // dropout stream, identical for every probe
  bool include_input = false;
  std::size_t max_per_tensor = 0;  // 0 probes every scalar
};

/// Checks every trainable parameter scalar (and optionally the input) of a
/// network under the given loss.
GradCheckResult gradient_check(Network& net, const Tensor& x, const Tensor& target, LossKind loss,
                               const GradCheckOptions& opts = {});

/// |d output[index] / d x| for every input element.
Tensor saliency(const Network& net, const Tensor& x, std::size_t output_index);

}  // namespace tinydl
