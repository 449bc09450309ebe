#include "tinydl/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "tinydl/errors.hpp"

namespace tinydl {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_bytes(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

Network::Network(std::string name, Shape input_shape)
    : name_(std::move(name)), input_shape_(std::move(input_shape)) {
  if (input_shape_.empty()) throw DimensionError("network input shape must have rank >= 1");
}

Network::Network(const Network& other)
    : name_(other.name_),
      input_shape_(other.input_shape_),
      frozen_(other.frozen_),
      shapes_(other.shapes_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
  const Shape& in = shapes_.empty() ? input_shape_ : shapes_.back();
  Shape out;
  try {
    out = layer->output_shape(in);
  } catch (const DimensionError& e) {
    throw DimensionError("layer " + std::to_string(layers_.size()) + " (" + layer->name() +
                         "): " + e.what());
  }
  layers_.push_back(std::move(layer));
  frozen_.push_back(false);
  shapes_.push_back(std::move(out));
  return *this;
}

const Shape& Network::output_shape() const {
  return shapes_.empty() ? input_shape_ : shapes_.back();
}

void Network::freeze(std::span<const std::size_t> indices) {
  for (auto i : indices) {
    if (i >= layers_.size()) {
      throw ConfigError("freeze: layer index " + std::to_string(i) + " out of range (" +
                        std::to_string(layers_.size()) + " layers)");
    }
  }
  for (auto i : indices) frozen_[i] = true;
}

void Network::set_frozen(std::size_t i, bool frozen) { frozen_.at(i) = frozen; }

std::vector<Tensor*> Network::parameters(bool trainable_only) {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (trainable_only && frozen_[i]) continue;
    for (auto& p : layers_[i]->params()) out.push_back(&p);
  }
  return out;
}

std::vector<const Tensor*> Network::parameters(bool trainable_only) const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (trainable_only && frozen_[i]) continue;
    for (const auto& p : layers_[i]->params()) out.push_back(&p);
  }
  return out;
}

std::vector<const Tensor*> Network::regularized_weights() const {
  std::vector<const Tensor*> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (frozen_[i]) continue;
    const auto& ps = layers_[i]->params();
    for (std::size_t k = 0; k < ps.size(); ++k)
      if (layers_[i]->is_weight(k)) out.push_back(&ps[k]);
  }
  return out;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->param_count();
  return n;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = kFnvOffset;
  for (const Tensor* p : parameters()) h = fnv_bytes(h, p->raw(), p->size() * sizeof(double));
  return h;
}

std::uint64_t Network::layer_checksum(std::size_t i) const {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : layers_.at(i)->params()) h = fnv_bytes(h, p.raw(), p.size() * sizeof(double));
  return h;
}

// --- propagation ---------------------------------------------------------------

NetForward forward(const Network& net, const Tensor& x, Mode mode, Rng& rng) {
  if (x.shape() != net.input_shape()) {
    throw DimensionError(net.name() + ": input shape " + to_string(x.shape()) + " does not match " +
                         to_string(net.input_shape()));
  }
  NetForward out;
  out.caches.reserve(net.size());
  Tensor current = x;
  for (std::size_t i = 0; i < net.size(); ++i) {
    Forward f;
    try {
      f = net.layer(i).forward(current, mode, rng);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " (" + net.layer(i).name() + "): " + e.what());
    }
    out.caches.push_back(std::move(f.cache));
    current = std::move(f.output);
  }
  out.output = std::move(current);
  return out;
}

NetBackward backward(const Network& net, std::vector<LayerCache>& caches, const Tensor& loss_grad) {
  if (caches.size() != net.size()) {
    throw StateError(net.name() + ": backward needs " + std::to_string(net.size()) +
                     " caches, got " + std::to_string(caches.size()));
  }
  NetBackward out;
  out.param_grads.resize(net.size());
  Tensor g = loss_grad;
  for (std::size_t i = net.size(); i-- > 0;) {
    Backward b = net.layer(i).backward(caches[i], g);
    if (net.frozen(i)) {
      for (auto& t : b.grad_params) t.fill(0.0);
    }
    out.param_grads[i] = std::move(b.grad_params);
    g = std::move(b.grad_input);
  }
  out.grad_input = std::move(g);
  return out;
}

Tensor predict(const Network& net, const Tensor& x) {
  Rng unused(0);
  return forward(net, x, Mode::inference, unused).output;
}

std::vector<Tensor> flatten_grads(const Network& net, NetBackward&& grads, bool trainable_only) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (trainable_only && net.frozen(i)) continue;
    for (auto& t : grads.param_grads[i]) out.push_back(std::move(t));
  }
  return out;
}

// --- gradient checking ---------------------------------------------------------

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(const std::function<double()>& loss_fn,
                                std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                double eps, double tol,
                                const std::function<std::uint64_t()>& signature, std::size_t max_per_tensor) {
  if (params.size() != analytic.size()) throw DimensionError("check_gradients: parameter/gradient count mismatch");
  if (!(eps >= 1e-8 && eps <= 1e-4)) throw ConfigError("gradient check step must lie in [1e-8, 1e-4]");
  GradCheckResult r;
  std::uint64_t base_sig = 0;
  if (signature) {
    loss_fn();
    base_sig = signature();
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    require_same_shape(w, analytic[p], "check_gradients");
    const std::size_t stride =
        max_per_tensor == 0 || w.size() <= max_per_tensor ? 1 : (w.size() + max_per_tensor - 1) / max_per_tensor;
    for (std::size_t i = 0; i < w.size(); i += stride) {
      const double saved = w[i];
      w[i] = saved + eps;
      const double up = loss_fn();
      const bool up_ok = !signature || signature() == base_sig;
      w[i] = saved - eps;
      const double down = loss_fn();
      const bool down_ok = !signature || signature() == base_sig;
      w[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("gradient check: non-finite loss while probing");
      }
      if (!up_ok || !down_ok) {
        ++r.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[p][i], numeric);
      r.max_rel_error = std::max(r.max_rel_error, err);
      ++r.probes;
      const double noise = kRoundoffUlps * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(up), std::abs(down)) / (2.0 * eps);
      if (err == 0.0 || std::max(std::abs(analytic[p][i]), std::abs(numeric)) * tol > noise) {
        r.resolved_max_rel_error = std::max(r.resolved_max_rel_error, err);
      } else {
        ++r.unresolved;
      }
    }
  }
  r.pass = r.max_rel_error < tol;
  return r;
}

std::uint64_t kink_signature(const Network& net, const std::vector<LayerCache>& caches) {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec spec = net.layer(i).spec();
    const LayerCache& c = caches[i];
    if (spec.kind == LayerKind::activation && spec.activation == Activation::relu) {
      for (double v : c.saved[0].data()) {
        const unsigned char bit = v > 0.0;
        h = fnv_bytes(h, &bit, 1);
      }
    } else if (spec.kind == LayerKind::maxpool) {
      h = fnv_bytes(h, c.indices.data(), c.indices.size() * sizeof(std::size_t));
    }
  }
  return h;
}

GradCheckResult gradient_check(Network& net, const Tensor& x, const Tensor& target, LossKind kind,
                               const GradCheckOptions& opts) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).differentiable()) {
      throw UnsupportedError("gradient check: layer " + std::to_string(i) + " (" + net.layer(i).name() +
                             ") is not differentiable");
    }
  }
  Tensor input = x;
  std::uint64_t last_sig = 0;
  const auto evaluate = [&]() {
    Rng rng(opts.seed);
    NetForward f = forward(net, input, Mode::training, rng);
    LossValue l = loss(kind, f.output, target);
    last_sig = kink_signature(net, f.caches);
    if (kind == LossKind::mean_absolute_error) {
      for (std::size_t i = 0; i < f.output.size(); ++i) {
        const unsigned char side = f.output[i] > target[i];
        last_sig = fnv_bytes(last_sig, &side, 1);
      }
    }
    double value = l.value;
    if (opts.reg_strength > 0.0) {
      const auto weights = net.regularized_weights();
      value += l2_penalty(weights, opts.reg_strength).value;
    }
    return value;
  };

  Rng rng(opts.seed);
  NetForward f = forward(net, input, Mode::training, rng);
  LossValue l = loss(kind, f.output, target);
  NetBackward b = backward(net, f.caches, l.grad);
  Tensor grad_input = b.grad_input;
  std::vector<Tensor> analytic = flatten_grads(net, std::move(b), true);
  std::vector<Tensor*> params = net.parameters(true);
  if (opts.reg_strength > 0.0) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (net.frozen(i)) continue;
      for (std::size_t p = 0; p < net.layer(i).params().size(); ++p, ++k) {
        if (net.layer(i).is_weight(p)) analytic[k] += scale(net.layer(i).params()[p], 2.0 * opts.reg_strength);
      }
    }
  }
  if (opts.include_input) {
    params.push_back(&input);
    analytic.push_back(grad_input);
  }
  return check_gradients(evaluate, params, analytic, opts.eps, opts.tolerance, [&]() { return last_sig; },
                         opts.max_per_tensor);
}

Tensor saliency(const Network& net, const Tensor& x, std::size_t output_index) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).differentiable()) {
      throw UnsupportedError("saliency: layer " + std::to_string(i) + " (" + net.layer(i).name() +
                             ") is not differentiable");
    }
  }
  Rng rng(0);
  NetForward f = forward(net, x, Mode::inference, rng);
  if (output_index >= f.output.size()) {
    throw DimensionError("saliency: output index " + std::to_string(output_index) + " out of " +
                         std::to_string(f.output.size()));
  }
  Tensor onehot(f.output.shape());
  onehot[output_index] = 1.0;
  Tensor g = backward(net, f.caches, onehot).grad_input;
  for (auto& v : g.data()) v = std::abs(v);
  return g;
}

}  // namespace tinydl
