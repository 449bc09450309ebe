#include "tinydl/layers.hpp"

#include <algorithm>
#include <cmath>

#include "tinydl/errors.hpp"

namespace tinydl {

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (kernel == 0 || stride == 0) throw DimensionError("kernel and stride must be positive");
  const std::size_t padded = extent + 2 * padding;
  if (kernel > padded) {
    throw DimensionError("kernel " + std::to_string(kernel) + " larger than padded extent " +
                         std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

double activate(Activation kind, double x, double threshold) {
  switch (kind) {
    case Activation::step: return x >= threshold ? 1.0 : 0.0;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      // Split by sign so exp never overflows.
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: return x;
  }
  return x;
}

Tensor activate(Activation kind, const Tensor& x, double threshold) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(kind, x[i], threshold);
  return out;
}

namespace {

// Softmax of n values with the given element stride, written in place.
void softmax_strided(const double* in, double* out, std::size_t n, std::size_t stride) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i * stride]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i * stride] = std::exp(in[i * stride] - mx);
    total += out[i * stride];
  }
  for (std::size_t i = 0; i < n; ++i) out[i * stride] /= total;
}

}  // namespace

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("softmax expects rank-1 logits, got " + to_string(logits.shape()));
  Tensor out(logits.shape());
  softmax_strided(logits.raw(), out.raw(), logits.size(), 1);
  return out;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  if (x.rank() != 3) throw DimensionError("upsample expects [C,H,W], got " + to_string(x.shape()));
  if (factor == 0) throw ConfigError("upsample factor must be positive");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  Tensor out({c, h * factor, w * factor});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < h * factor; ++i)
      for (std::size_t j = 0; j < w * factor; ++j) out.at(k, i, j) = x.at(k, i / factor, j / factor);
  return out;
}

// --- Layer base ----------------------------------------------------------------

Forward Layer::forward(const Tensor& x, Mode mode, Rng& rng) const {
  const Shape expected = output_shape(x.shape());
  Forward f;
  f.cache.input_shape = x.shape();
  f.output = do_forward(x, mode, rng, f.cache);
  if (f.output.shape() != expected) {
    throw DimensionError(name() + ": produced " + to_string(f.output.shape()) + ", inferred " +
                         to_string(expected));
  }
  f.cache.output_shape = f.output.shape();
  f.cache.live = true;
  return f;
}

Backward Layer::backward(LayerCache& cache, const Tensor& grad_out) const {
  if (!cache.live) throw StateError(name() + ": backward called without a live forward cache");
  if (grad_out.shape() != cache.output_shape) {
    throw DimensionError(name() + ": gradient shape " + to_string(grad_out.shape()) +
                         " does not match forward output " + to_string(cache.output_shape));
  }
  Backward b = do_backward(cache, grad_out);
  cache.live = false;
  cache.saved.clear();
  cache.indices.clear();
  return b;
}

std::size_t Layer::param_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

// Grouped direct cross-correlation. xpad [C,Hp,Wp], filters [K,Cg,kh,kw];
// output channel k reads input channels starting at (k / (K/groups)) * Cg.
Tensor correlate(const Tensor& xpad, const Tensor& filters, const Tensor& bias,
                 std::size_t stride, std::size_t groups) {
  const std::size_t hp = xpad.extent(1), wp = xpad.extent(2);
  const std::size_t k_out = filters.extent(0), cg = filters.extent(1);
  const std::size_t kh = filters.extent(2), kw = filters.extent(3);
  const std::size_t ho = (hp - kh) / stride + 1, wo = (wp - kw) / stride + 1;
  const std::size_t per_group = k_out / groups;
  Tensor out({k_out, ho, wo});
  for (std::size_t k = 0; k < k_out; ++k) {
    double* o = out.raw() + k * ho * wo;
    std::fill(o, o + ho * wo, bias[k]);
    const std::size_t base = (k / per_group) * cg;
    for (std::size_t ci = 0; ci < cg; ++ci) {
      const std::size_t c = base + ci;
      for (std::size_t u = 0; u < kh; ++u) {
        if (stride == 1 && kw == 3) {
          const double* wr = filters.raw() + ((k * cg + ci) * kh + u) * kw;
          const double w0 = wr[0], w1 = wr[1], w2 = wr[2];
          for (std::size_t i = 0; i < ho; ++i) {
            const double* xr = xpad.raw() + (c * hp + i + u) * wp;
            double* orow = o + i * wo;
            for (std::size_t j = 0; j < wo; ++j) orow[j] = ((orow[j] + w0 * xr[j]) + w1 * xr[j + 1]) + w2 * xr[j + 2];
          }
          continue;
        }
        for (std::size_t v = 0; v < kw; ++v) {
          const double w = filters[((k * cg + ci) * kh + u) * kw + v];
          for (std::size_t i = 0; i < ho; ++i) {
            const double* xr = xpad.raw() + (c * hp + i * stride + u) * wp + v;
            double* orow = o + i * wo;
            if (stride == 1) {
              for (std::size_t j = 0; j < wo; ++j) orow[j] += w * xr[j];
            } else {
              for (std::size_t j = 0; j < wo; ++j) orow[j] += w * xr[j * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

struct CorrelateGrads {
  Tensor input;
  Tensor filters;
  Tensor bias;
};

CorrelateGrads correlate_backward(const Tensor& xpad, const Tensor& filters, const Tensor& grad,
                                  std::size_t stride, std::size_t groups) {
  const std::size_t hp = xpad.extent(1), wp = xpad.extent(2);
  const std::size_t k_out = filters.extent(0), cg = filters.extent(1);
  const std::size_t kh = filters.extent(2), kw = filters.extent(3);
  const std::size_t ho = grad.extent(1), wo = grad.extent(2);
  const std::size_t per_group = k_out / groups;
  CorrelateGrads g{Tensor(xpad.shape()), Tensor(filters.shape()), Tensor({k_out})};
  for (std::size_t k = 0; k < k_out; ++k) {
    const double* gk = grad.raw() + k * ho * wo;
    double gb = 0.0;
    for (std::size_t i = 0; i < ho * wo; ++i) gb += gk[i];
    g.bias[k] = gb;
    const std::size_t base = (k / per_group) * cg;
    for (std::size_t ci = 0; ci < cg; ++ci) {
      const std::size_t c = base + ci;
      for (std::size_t u = 0; u < kh; ++u) {
        if (stride == 1 && kw == 3) {
          const std::size_t f0 = ((k * cg + ci) * kh + u) * kw;
          const double w0 = filters[f0], w1 = filters[f0 + 1], w2 = filters[f0 + 2];
          double lane[3][4] = {};
          for (std::size_t i = 0; i < ho; ++i) {
            const std::size_t off = (c * hp + i + u) * wp;
            const double* xr = xpad.raw() + off;
            double* gxr = g.input.raw() + off;
            const double* grow = gk + i * wo;
            for (std::size_t v = 0; v < 3; ++v) {
              std::size_t j = 0;
              for (; j + 4 <= wo; j += 4)
                for (std::size_t l = 0; l < 4; ++l) lane[v][l] += grow[j + l] * xr[j + v + l];
              for (; j < wo; ++j) lane[v][0] += grow[j] * xr[j + v];
            }
            // gx[p] gathers w_v * g[p - v] in the order v = 0, 1, 2.
            for (std::size_t q = 0; q < 2 && q < wo + 2; ++q) {
              if (q < wo) gxr[q] += w0 * grow[q];
              if (q >= 1 && q - 1 < wo) gxr[q] += w1 * grow[q - 1];
            }
            for (std::size_t q = 2; q < wo; ++q) gxr[q] = ((gxr[q] + w0 * grow[q]) + w1 * grow[q - 1]) + w2 * grow[q - 2];
            for (std::size_t q = std::max<std::size_t>(wo, 2); q < wo + 2; ++q) {
              if (q - 1 < wo) gxr[q] += w1 * grow[q - 1];
              gxr[q] += w2 * grow[q - 2];
            }
          }
          for (std::size_t v = 0; v < 3; ++v)
            g.filters[f0 + v] = (lane[v][0] + lane[v][1]) + (lane[v][2] + lane[v][3]);
          continue;
        }
        for (std::size_t v = 0; v < kw; ++v) {
          const std::size_t fi = ((k * cg + ci) * kh + u) * kw + v;
          const double w = filters[fi];
          double acc = 0.0;
          for (std::size_t i = 0; i < ho; ++i) {
            const std::size_t off = (c * hp + i * stride + u) * wp + v;
            const double* xr = xpad.raw() + off;
            double* gxr = g.input.raw() + off;
            const double* grow = gk + i * wo;
            if (stride == 1) {
              double lane[4] = {0.0, 0.0, 0.0, 0.0};
              std::size_t j = 0;
              for (; j + 4 <= wo; j += 4)
                for (std::size_t l = 0; l < 4; ++l) lane[l] += grow[j + l] * xr[j + l];
              for (; j < wo; ++j) lane[0] += grow[j] * xr[j];
              acc += (lane[0] + lane[1]) + (lane[2] + lane[3]);
              for (j = 0; j < wo; ++j) gxr[j] += w * grow[j];
            } else {
              for (std::size_t j = 0; j < wo; ++j) {
                acc += grow[j] * xr[j * stride];
                gxr[j * stride] += w * grow[j];
              }
            }
          }
          g.filters[fi] = acc;
        }
      }
    }
  }
  return g;
}

Tensor crop2d(const Tensor& padded, std::size_t pad, const Shape& shape) {
  if (pad == 0) return padded;
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  const std::size_t pw = padded.extent(2), ph = padded.extent(1);
  Tensor out(shape);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(padded.raw() + (k * ph + i + pad) * pw + pad, w, out.raw() + (k * h + i) * w);
  return out;
}

void require_rank(const Shape& s, std::size_t rank, const std::string& who) {
  if (s.size() != rank) {
    throw DimensionError(who + " expects a rank-" + std::to_string(rank) + " input, got " + to_string(s));
  }
}

}  // namespace

// --- Dense ---------------------------------------------------------------------

DenseLayer::DenseLayer(std::size_t inputs, std::size_t outputs, Rng& rng) {
  add_param(uniform_init({outputs, inputs}, inputs, rng), true);
  add_param(Tensor({outputs}), false);
}

DenseLayer::DenseLayer(Tensor weights, Tensor bias) {
  if (weights.rank() != 2 || bias.rank() != 1 || bias.extent(0) != weights.extent(0)) {
    throw DimensionError("dense: weights " + to_string(weights.shape()) + " and bias " +
                         to_string(bias.shape()) + " are inconsistent");
  }
  add_param(std::move(weights), true);
  add_param(std::move(bias), false);
}

LayerSpec DenseLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = params_[0].extent(0);
  return s;
}

Shape DenseLayer::output_shape(const Shape& input) const {
  require_rank(input, 1, "dense");
  if (input[0] != params_[0].extent(1)) {
    throw DimensionError("dense: expects " + std::to_string(params_[0].extent(1)) + " inputs, got " +
                         std::to_string(input[0]));
  }
  return {params_[0].extent(0)};
}

Tensor DenseLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  cache.saved = {x};
  return affine(params_[0], x, params_[1]);
}

Backward DenseLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  const Tensor& x = cache.saved[0];
  const Tensor& w = params_[0];
  const std::size_t m = w.extent(0), n = w.extent(1);
  Tensor gw({m, n});
  Tensor gx({n});
  for (std::size_t i = 0; i < m; ++i) {
    const double gi = g[i];
    const double* wr = w.raw() + i * n;
    double* gwr = gw.raw() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      gwr[j] = gi * x[j];
      gx[j] += wr[j] * gi;
    }
  }
  return {std::move(gx), {std::move(gw), g}};
}

// --- Conv2d --------------------------------------------------------------------

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t filters, std::size_t kernel,
                         std::size_t stride, std::size_t padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  if (stride == 0 || kernel == 0 || filters == 0) throw ConfigError("conv2d: kernel, stride, filters must be positive");
  add_param(uniform_init({filters, in_channels, kernel, kernel}, in_channels * kernel * kernel, rng), true);
  add_param(Tensor({filters}), false);
}

Conv2dLayer::Conv2dLayer(Tensor filters, Tensor bias, std::size_t stride, std::size_t padding)
    : stride_(stride), padding_(padding) {
  if (filters.rank() != 4 || bias.rank() != 1 || bias.extent(0) != filters.extent(0)) {
    throw DimensionError("conv2d: filters " + to_string(filters.shape()) + " and bias " +
                         to_string(bias.shape()) + " are inconsistent");
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  add_param(std::move(filters), true);
  add_param(std::move(bias), false);
}

LayerSpec Conv2dLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.units = params_[0].extent(0);
  s.kernel = params_[0].extent(2);
  s.stride = stride_;
  s.padding = padding_;
  return s;
}

Shape Conv2dLayer::output_shape(const Shape& input) const {
  require_rank(input, 3, "conv2d");
  const Tensor& f = params_[0];
  if (input[0] != f.extent(1)) {
    throw DimensionError("conv2d: filters have depth " + std::to_string(f.extent(1)) + ", input has " +
                         std::to_string(input[0]) + " channels");
  }
  return {f.extent(0), conv_output_extent(input[1], f.extent(2), stride_, padding_),
          conv_output_extent(input[2], f.extent(3), stride_, padding_)};
}

Tensor Conv2dLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  Tensor xpad = zero_pad2d(x, padding_);
  Tensor out = correlate(xpad, params_[0], params_[1], stride_, 1);
  cache.saved = {std::move(xpad)};
  return out;
}

Backward Conv2dLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  auto grads = correlate_backward(cache.saved[0], params_[0], g, stride_, 1);
  return {crop2d(grads.input, padding_, cache.input_shape),
          {std::move(grads.filters), std::move(grads.bias)}};
}

// --- Separable conv ------------------------------------------------------------

SeparableConv2dLayer::SeparableConv2dLayer(std::size_t in_channels, std::size_t filters,
                                           std::size_t kernel, std::size_t stride,
                                           std::size_t padding, Rng& rng)
    : stride_(stride), padding_(padding) {
  if (stride == 0 || kernel == 0 || filters == 0) throw ConfigError("sepconv2d: kernel, stride, filters must be positive");
  add_param(uniform_init({in_channels, 1, kernel, kernel}, kernel * kernel, rng), true);
  add_param(Tensor({in_channels}), false);
  add_param(uniform_init({filters, in_channels, 1, 1}, in_channels, rng), true);
  add_param(Tensor({filters}), false);
}

SeparableConv2dLayer::SeparableConv2dLayer(Tensor depthwise, Tensor depthwise_bias,
                                           Tensor pointwise, Tensor pointwise_bias,
                                           std::size_t stride, std::size_t padding)
    : stride_(stride), padding_(padding) {
  if (depthwise.rank() != 4 || depthwise.extent(1) != 1 || pointwise.rank() != 4 ||
      pointwise.extent(2) != 1 || pointwise.extent(3) != 1 ||
      pointwise.extent(1) != depthwise.extent(0) || depthwise_bias.shape() != Shape{depthwise.extent(0)} ||
      pointwise_bias.shape() != Shape{pointwise.extent(0)}) {
    throw DimensionError("sepconv2d: inconsistent parameter shapes");
  }
  if (stride == 0) throw ConfigError("sepconv2d: stride must be positive");
  add_param(std::move(depthwise), true);
  add_param(std::move(depthwise_bias), false);
  add_param(std::move(pointwise), true);
  add_param(std::move(pointwise_bias), false);
}

LayerSpec SeparableConv2dLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::sepconv2d;
  s.units = params_[2].extent(0);
  s.kernel = params_[0].extent(2);
  s.stride = stride_;
  s.padding = padding_;
  return s;
}

Shape SeparableConv2dLayer::output_shape(const Shape& input) const {
  require_rank(input, 3, "sepconv2d");
  if (input[0] != params_[0].extent(0)) {
    throw DimensionError("sepconv2d: expects " + std::to_string(params_[0].extent(0)) +
                         " channels, got " + std::to_string(input[0]));
  }
  return {params_[2].extent(0), conv_output_extent(input[1], params_[0].extent(2), stride_, padding_),
          conv_output_extent(input[2], params_[0].extent(3), stride_, padding_)};
}

Tensor SeparableConv2dLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  Tensor xpad = zero_pad2d(x, padding_);
  Tensor depth = correlate(xpad, params_[0], params_[1], stride_, x.extent(0));
  Tensor out = correlate(depth, params_[2], params_[3], 1, 1);
  cache.saved = {std::move(xpad), std::move(depth)};
  return out;
}

Backward SeparableConv2dLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  const std::size_t channels = cache.input_shape[0];
  auto point = correlate_backward(cache.saved[1], params_[2], g, 1, 1);
  auto depth = correlate_backward(cache.saved[0], params_[0], point.input, stride_, channels);
  return {crop2d(depth.input, padding_, cache.input_shape),
          {std::move(depth.filters), std::move(depth.bias), std::move(point.filters),
           std::move(point.bias)}};
}

// --- Pooling -------------------------------------------------------------------

Pool2dLayer::Pool2dLayer(PoolKind kind, std::size_t size, std::size_t stride)
    : kind_(kind), size_(size), stride_(stride) {
  if (size == 0 || stride == 0) throw ConfigError("pool: size and stride must be at least 1");
}

LayerSpec Pool2dLayer::spec() const {
  LayerSpec s;
  s.kind = kind_ == PoolKind::max ? LayerKind::maxpool : LayerKind::avgpool;
  s.size = size_;
  s.stride = stride_;
  return s;
}

Shape Pool2dLayer::output_shape(const Shape& input) const {
  require_rank(input, 3, name());
  return {input[0], conv_output_extent(input[1], size_, stride_, 0),
          conv_output_extent(input[2], size_, stride_, 0)};
}

Tensor Pool2dLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  const Shape os = output_shape(x.shape());
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t ho = os[1], wo = os[2];
  Tensor out(os);
  if (kind_ == PoolKind::max) cache.indices.resize(out.size());
  const double inv = 1.0 / static_cast<double>(size_ * size_);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        const std::size_t oi = (k * ho + i) * wo + j;
        if (kind_ == PoolKind::max) {
          // First maximum in row-major window order wins.
          std::size_t best = (k * h + i * stride_) * w + j * stride_;
          for (std::size_t u = 0; u < size_; ++u)
            for (std::size_t v = 0; v < size_; ++v) {
              const std::size_t idx = (k * h + i * stride_ + u) * w + j * stride_ + v;
              if (x[idx] > x[best]) best = idx;
            }
          out[oi] = x[best];
          cache.indices[oi] = best;
        } else {
          double acc = 0.0;
          for (std::size_t u = 0; u < size_; ++u)
            for (std::size_t v = 0; v < size_; ++v) acc += x.at(k, i * stride_ + u, j * stride_ + v);
          out[oi] = acc * inv;
        }
      }
    }
  }
  return out;
}

Backward Pool2dLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  Tensor gx(cache.input_shape);
  if (kind_ == PoolKind::max) {
    for (std::size_t oi = 0; oi < g.size(); ++oi) gx[cache.indices[oi]] += g[oi];
    return {std::move(gx), {}};
  }
  const std::size_t c = cache.output_shape[0], ho = cache.output_shape[1], wo = cache.output_shape[2];
  const double inv = 1.0 / static_cast<double>(size_ * size_);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        const double share = g[(k * ho + i) * wo + j] * inv;
        for (std::size_t u = 0; u < size_; ++u)
          for (std::size_t v = 0; v < size_; ++v) gx.at(k, i * stride_ + u, j * stride_ + v) += share;
      }
  return {std::move(gx), {}};
}

// --- Activation ----------------------------------------------------------------

ActivationLayer::ActivationLayer(Activation kind, double threshold) : kind_(kind), threshold_(threshold) {
  if (!std::isfinite(threshold)) throw ConfigError("step threshold must be finite");
}

LayerSpec ActivationLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = kind_;
  s.threshold = threshold_;
  return s;
}

std::string ActivationLayer::name() const {
  switch (kind_) {
    case Activation::step: return "step";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "activation";
}

Tensor ActivationLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  Tensor y = activate(kind_, x, threshold_);
  if (kind_ == Activation::relu) cache.saved = {x};
  else if (kind_ == Activation::sigmoid || kind_ == Activation::tanh) cache.saved = {y};
  return y;
}

Backward ActivationLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  Tensor gx(g.shape());
  switch (kind_) {
    case Activation::step:  // derivative taken as zero everywhere
      break;
    case Activation::linear:
      gx = g;
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] = cache.saved[0][i] > 0.0 ? g[i] : 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = cache.saved[0][i];
        gx[i] = g[i] * y * (1.0 - y);
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = cache.saved[0][i];
        gx[i] = g[i] * (1.0 - y * y);
      }
      break;
  }
  return {std::move(gx), {}};
}

// --- Softmax -------------------------------------------------------------------

LayerSpec SoftmaxLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

Shape SoftmaxLayer::output_shape(const Shape& input) const {
  if (input.size() != 1 && input.size() != 3) {
    throw DimensionError("softmax expects rank-1 or [C,H,W] input, got " + to_string(input));
  }
  return input;
}

Tensor SoftmaxLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache& cache) const {
  Tensor y(x.shape());
  if (x.rank() == 1) {
    softmax_strided(x.raw(), y.raw(), x.size(), 1);
  } else {
    const std::size_t c = x.extent(0), plane = x.extent(1) * x.extent(2);
    for (std::size_t p = 0; p < plane; ++p) softmax_strided(x.raw() + p, y.raw() + p, c, plane);
  }
  cache.saved = {y};
  return y;
}

Backward SoftmaxLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  const Tensor& y = cache.saved[0];
  Tensor gx(g.shape());
  const std::size_t c = y.extent(0);
  const std::size_t plane = y.rank() == 1 ? 1 : y.extent(1) * y.extent(2);
  for (std::size_t p = 0; p < plane; ++p) {
    double dot = 0.0;
    for (std::size_t k = 0; k < c; ++k) dot += y[k * plane + p] * g[k * plane + p];
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = k * plane + p;
      gx[i] = y[i] * (g[i] - dot);
    }
  }
  return {std::move(gx), {}};
}

// --- Dropout -------------------------------------------------------------------

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
}

LayerSpec DropoutLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.rate = rate_;
  return s;
}

Tensor DropoutLayer::do_forward(const Tensor& x, Mode mode, Rng& rng, LayerCache& cache) const {
  if (mode == Mode::inference) return x;
  const double keep_scale = 1.0 / (1.0 - rate_);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = rng.bernoulli(rate_) ? 0.0 : keep_scale;
    y[i] = x[i] * mask[i];
  }
  cache.saved = {std::move(mask)};
  return y;
}

Backward DropoutLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  if (cache.saved.empty()) return {g, {}};  // inference-mode forward
  return {mul(g, cache.saved[0]), {}};
}

// --- Upsample / flatten --------------------------------------------------------

UpsampleLayer::UpsampleLayer(std::size_t factor) : factor_(factor) {
  if (factor == 0) throw ConfigError("upsample factor must be positive");
}

LayerSpec UpsampleLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::upsample;
  s.size = factor_;
  return s;
}

Shape UpsampleLayer::output_shape(const Shape& input) const {
  require_rank(input, 3, "upsample");
  return {input[0], input[1] * factor_, input[2] * factor_};
}

Tensor UpsampleLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache&) const {
  return upsample_nearest(x, factor_);
}

Backward UpsampleLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  Tensor gx(cache.input_shape);
  const std::size_t c = g.extent(0), h = g.extent(1), w = g.extent(2);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) gx.at(k, i / factor_, j / factor_) += g.at(k, i, j);
  return {std::move(gx), {}};
}

LayerSpec FlattenLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

Tensor FlattenLayer::do_forward(const Tensor& x, Mode, Rng&, LayerCache&) const { return flatten(x); }

Backward FlattenLayer::do_backward(const LayerCache& cache, const Tensor& g) const {
  return {g.reshaped(cache.input_shape), {}};
}

// --- Factory -------------------------------------------------------------------

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input, Rng& rng) {
  std::unique_ptr<Layer> layer;
  switch (spec.kind) {
    case LayerKind::dense:
      require_rank(input, 1, "dense");
      if (spec.units == 0) throw ConfigError("dense: units must be positive");
      layer = std::make_unique<DenseLayer>(input[0], spec.units, rng);
      break;
    case LayerKind::conv2d:
      require_rank(input, 3, "conv2d");
      layer = std::make_unique<Conv2dLayer>(input[0], spec.units, spec.kernel, spec.stride, spec.padding, rng);
      break;
    case LayerKind::sepconv2d:
      require_rank(input, 3, "sepconv2d");
      layer = std::make_unique<SeparableConv2dLayer>(input[0], spec.units, spec.kernel, spec.stride,
                                                     spec.padding, rng);
      break;
    case LayerKind::maxpool:
      layer = std::make_unique<Pool2dLayer>(PoolKind::max, spec.size, spec.stride);
      break;
    case LayerKind::avgpool:
      layer = std::make_unique<Pool2dLayer>(PoolKind::average, spec.size, spec.stride);
      break;
    case LayerKind::activation:
      layer = std::make_unique<ActivationLayer>(spec.activation, spec.threshold);
      break;
    case LayerKind::softmax: layer = std::make_unique<SoftmaxLayer>(); break;
    case LayerKind::dropout: layer = std::make_unique<DropoutLayer>(spec.rate); break;
    case LayerKind::upsample: layer = std::make_unique<UpsampleLayer>(spec.size); break;
    case LayerKind::flatten: layer = std::make_unique<FlattenLayer>(); break;
  }
  layer->output_shape(input);  // validates geometry
  return layer;
}

}  // namespace tinydl
