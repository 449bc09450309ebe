#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "tinydl/rng.hpp"
#include "tinydl/tensor.hpp"

namespace tinydl {

enum class Mode { training, inference };

enum class Activation { step, relu, sigmoid, tanh, linear };

enum class LayerKind {
  dense,
  conv2d,
  sepconv2d,
  maxpool,
  avgpool,
  activation,
  softmax,
  dropout,
  upsample,
  flatten,
};

/// Hyperparameters of one layer, independent of its learned values. This is
/// what the model-file header and the config grammar describe.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;    // dense outputs, conv filters
  std::size_t kernel = 3;   // conv kernel extent (square)
  std::size_t stride = 1;   // conv / pool stride
  std::size_t padding = 0;  // conv zero padding
  std::size_t size = 2;     // pool window, upsample factor
  double rate = 0.0;        // dropout probability
  Activation activation = Activation::relu;
  double threshold = 0.0;   // step activation

  bool operator==(const LayerSpec&) const = default;
};

/// Values the backward pass needs from the matching forward call.
///
/// A cache is live from the forward that produced it until the single
/// backward that consumes it.
struct LayerCache {
  std::vector<Tensor> saved;
  std::vector<std::size_t> indices;
  Shape input_shape;
  Shape output_shape;
  bool live = false;
};

struct Forward {
  Tensor output;
  LayerCache cache;
};

struct Backward {
  Tensor grad_input;
  std::vector<Tensor> grad_params;  // aligned with Layer::params(); empty if none
};

/// H' = floor((H + 2p - k) / s) + 1. Throws DimensionError when the kernel
/// does not fit the padded extent.
std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

double activate(Activation kind, double x, double threshold = 0.0);
Tensor activate(Activation kind, const Tensor& x, double threshold = 0.0);
/// Max-shifted softmax over a rank-1 tensor.
Tensor softmax(const Tensor& logits);
Tensor upsample_nearest(const Tensor& x, std::size_t factor);

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual std::string name() const = 0;
  /// Shape inference; throws DimensionError for inputs the layer cannot take.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  /// False for layers whose derivative is not usable (the step activation).
  virtual bool differentiable() const { return true; }

  Forward forward(const Tensor& x, Mode mode, Rng& rng) const;
  /// Consumes the cache. Throws StateError if it is not live and
  /// DimensionError if grad_out does not match the forward output.
  Backward backward(LayerCache& cache, const Tensor& grad_out) const;

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  /// Weights are subject to L2 regularization, biases are not.
  bool is_weight(std::size_t i) const { return weight_flags_.at(i); }
  std::size_t param_count() const;

 protected:
  virtual Tensor do_forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) const = 0;
  virtual Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const = 0;

  void add_param(Tensor t, bool weight) {
    params_.push_back(std::move(t));
    weight_flags_.push_back(weight);
  }

  std::vector<Tensor> params_;
  std::vector<bool> weight_flags_;
};

/// Fully connected: out = W x + b, W [m,n].
class DenseLayer : public Layer {
 public:
  DenseLayer(std::size_t inputs, std::size_t outputs, Rng& rng);
  DenseLayer(Tensor weights, Tensor bias);

  LayerSpec spec() const override;
  std::string name() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

  const Tensor& weights() const { return params_[0]; }
  const Tensor& bias() const { return params_[1]; }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;
};

/// Direct cross-correlation (no kernel flip) with filters [K,C,kh,kw].
class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel,
              std::size_t stride, std::size_t padding, Rng& rng);
  Conv2dLayer(Tensor filters, Tensor bias, std::size_t stride, std::size_t padding);

  LayerSpec spec() const override;
  std::string name() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }

  std::size_t stride() const { return stride_; }
  std::size_t padding() const { return padding_; }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  std::size_t stride_;
  std::size_t padding_;
};

/// Depthwise spatial convolution [C,1,k,k] followed by a pointwise 1x1
/// mixing convolution [K,C,1,1]. Parameters: depthwise filters, depthwise
/// bias [C], pointwise filters, pointwise bias [K].
class SeparableConv2dLayer : public Layer {
 public:
  SeparableConv2dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel,
                       std::size_t stride, std::size_t padding, Rng& rng);
  SeparableConv2dLayer(Tensor depthwise, Tensor depthwise_bias, Tensor pointwise,
                       Tensor pointwise_bias, std::size_t stride, std::size_t padding);

  LayerSpec spec() const override;
  std::string name() const override { return "sepconv2d"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<SeparableConv2dLayer>(*this);
  }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  std::size_t stride_;
  std::size_t padding_;
};

enum class PoolKind { max, average };

class Pool2dLayer : public Layer {
 public:
  Pool2dLayer(PoolKind kind, std::size_t size, std::size_t stride);

  LayerSpec spec() const override;
  std::string name() const override { return kind_ == PoolKind::max ? "maxpool" : "avgpool"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Pool2dLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  PoolKind kind_;
  std::size_t size_;
  std::size_t stride_;
};

class ActivationLayer : public Layer {
 public:
  explicit ActivationLayer(Activation kind, double threshold = 0.0);

  LayerSpec spec() const override;
  std::string name() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ActivationLayer>(*this); }
  bool differentiable() const override { return kind_ != Activation::step; }

  Activation kind() const { return kind_; }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  Activation kind_;
  double threshold_;
};

/// Softmax over a rank-1 tensor, or over the channel axis at every pixel of
/// a [C,H,W] tensor.
class SoftmaxLayer : public Layer {
 public:
  LayerSpec spec() const override;
  std::string name() const override { return "softmax"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SoftmaxLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) during training, so
/// inference is the identity.
class DropoutLayer : public Layer {
 public:
  explicit DropoutLayer(double rate);

  LayerSpec spec() const override;
  std::string name() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

  double rate() const { return rate_; }

 protected:
  Tensor do_forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  double rate_;
};

class UpsampleLayer : public Layer {
 public:
  explicit UpsampleLayer(std::size_t factor);

  LayerSpec spec() const override;
  std::string name() const override { return "upsample"; }
  Shape output_shape(const Shape& input) const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<UpsampleLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;

 private:
  std::size_t factor_;
};

class FlattenLayer : public Layer {
 public:
  LayerSpec spec() const override;
  std::string name() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override { return {shape_size(input)}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }

 protected:
  Tensor do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const override;
  Backward do_backward(const LayerCache& cache, const Tensor& grad_out) const override;
};

/// Build a freshly initialized layer for the given input shape. Weights are
/// uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input, Rng& rng);

}  // namespace tinydl
