#include "oracle.hpp"

#include <algorithm>
#include <stdexcept>

#include "helpers.hpp"
#include "tinydl/architecture.hpp"
#include "tinydl/generative.hpp"
#include "tinydl/recurrent.hpp"

namespace tinydl::test {

namespace {

LayerSpec spec_of(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

LayerSpec dense(std::size_t units) {
  LayerSpec s = spec_of(LayerKind::dense);
  s.units = units;
  return s;
}

LayerSpec conv(std::size_t filters, std::size_t kernel, std::size_t stride, std::size_t padding,
               LayerKind kind = LayerKind::conv2d) {
  LayerSpec s = spec_of(kind);
  s.units = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec pool(LayerKind kind, std::size_t size, std::size_t stride) {
  LayerSpec s = spec_of(kind);
  s.size = size;
  s.stride = stride;
  return s;
}

LayerSpec act(Activation a) {
  LayerSpec s = spec_of(LayerKind::activation);
  s.activation = a;
  return s;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

// Random image or vector shape.
Shape any_shape(Rng& rng) {
  if (rng.bernoulli(0.5)) return {pick(rng, 1, 6)};
  return {pick(rng, 1, 2), pick(rng, 1, 4), pick(rng, 1, 4)};
}

Tensor one_hot_map(std::size_t classes, std::size_t h, std::size_t w, Rng& rng) {
  Tensor t({classes, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) t.at(rng.below(classes), y, x) = 1.0;
  return t;
}

Tensor one_hot(std::size_t classes, Rng& rng) {
  Tensor t({classes});
  t[rng.below(classes)] = 1.0;
  return t;
}

GradCheckResult check_network(const Architecture& arch, std::uint64_t seed, const Tensor& x, const Tensor& target,
                              LossKind loss, double reg = 0.0, std::size_t max_per_tensor = 0) {
  Network net = build_network(arch, seed);
  GradCheckOptions opts;
  opts.eps = kOracleEps;
  opts.tolerance = kOracleTol;
  opts.seed = Rng::derive(seed, "dropout");
  opts.include_input = true;
  opts.reg_strength = reg;
  opts.max_per_tensor = max_per_tensor;
  return gradient_check(net, x, target, loss, opts);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return (h ^ v) * 1099511628211ULL; }

// Scalar loss sum_t r_t . y_t over a sequence of outputs.
double weighted_sum(const std::vector<Tensor>& ys, const std::vector<Tensor>& rs) {
  double s = 0.0;
  for (std::size_t t = 0; t < ys.size(); ++t) s += sum(mul(ys[t], rs[t]));
  return s;
}

std::vector<Tensor> random_steps(std::size_t count, std::size_t n, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < count; ++t) out.push_back(random_tensor({n}, rng));
  return out;
}

GradCheckResult run_check(const std::function<double()>& fn, std::vector<Tensor*> params,
                          const std::vector<Tensor>& analytic, const std::function<std::uint64_t()>& sig = {}) {
  return check_gradients(fn, params, analytic, kOracleEps, kOracleTol, sig);
}

GradCheckResult rnn_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 3), h = pick(rng, 1, 4), o = pick(rng, 1, 3), steps = 5;
  RnnCell cell = random_rnn_cell(n, h, o, rng);
  for (auto& v : cell.b_h.data()) v = rng.uniform(-0.5, 0.5);
  for (auto& v : cell.b_y.data()) v = rng.uniform(-0.5, 0.5);
  std::vector<Tensor> xs = random_steps(steps, n, rng);
  const std::vector<Tensor> rs = random_steps(steps, o, rng);
  Tensor h0 = random_tensor({h}, rng);

  RnnUnroll run = unroll(cell, xs, h0);
  RnnGrads g = bptt(cell, run, rs);
  std::vector<Tensor*> params = cell.parameters();
  std::vector<Tensor> analytic = g.params;
  for (std::size_t t = 0; t < steps; ++t) {
    params.push_back(&xs[t]);
    analytic.push_back(g.grad_inputs[t]);
  }
  params.push_back(&h0);
  analytic.push_back(g.grad_h0);
  return run_check([&] { return weighted_sum(unroll(cell, xs, h0).outputs, rs); }, params, analytic);
}

GradCheckResult gated_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = pick(rng, 1, 3), h = pick(rng, 1, 3), o = pick(rng, 1, 2), steps = 5;
  GatedCell cell = random_gated_cell(n, h, o, rng);
  for (Tensor* b : {&cell.b_i, &cell.b_f, &cell.b_o, &cell.b_g, &cell.b_y}) {
    for (auto& v : b->data()) v = rng.uniform(-0.5, 0.5);
  }
  std::vector<Tensor> xs = random_steps(steps, n, rng);
  const std::vector<Tensor> rs = random_steps(steps, o, rng);
  Tensor h0 = random_tensor({h}, rng);
  Tensor c0 = random_tensor({h}, rng);

  GatedUnroll run = gated_unroll(cell, xs, h0, c0);
  GatedGrads g = gated_bptt(cell, run, rs);
  std::vector<Tensor*> params = cell.parameters();
  std::vector<Tensor> analytic = g.params;
  for (std::size_t t = 0; t < steps; ++t) {
    params.push_back(&xs[t]);
    analytic.push_back(g.grad_inputs[t]);
  }
  params.push_back(&h0);
  analytic.push_back(g.grad_h0);
  params.push_back(&c0);
  analytic.push_back(g.grad_c0);
  return run_check([&] { return weighted_sum(gated_unroll(cell, xs, h0, c0).outputs, rs); }, params, analytic);
}

GradCheckResult cnn_rnn_case(std::uint64_t seed) {
  Rng rng(seed);
  Architecture arch;
  arch.input_shape = {1, 4, 4};
  arch.layers = {conv(2, 3, 1, 0), act(Activation::relu), spec_of(LayerKind::flatten), dense(3)};
  Network features = build_network(arch, seed);
  RnnCell cell = random_rnn_cell(3, 3, 2, rng);
  const std::size_t steps = 5;
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t < steps; ++t) frames.push_back(random_tensor({1, 4, 4}, rng));
  const std::vector<Tensor> rs = random_steps(steps, 2, rng);

  std::uint64_t sig = 0;
  const auto loss_fn = [&] {
    Rng unused(0);
    CnnRnnForward run = cnn_then_rnn(features, cell, frames, Mode::inference, unused);
    sig = 0;
    for (const auto& caches : run.frame_caches) sig = mix(sig, kink_signature(features, caches));
    return weighted_sum(run.rnn.outputs, rs);
  };
  Rng unused(0);
  CnnRnnForward run = cnn_then_rnn(features, cell, frames, Mode::inference, unused);
  CnnRnnGrads g = cnn_rnn_backward(features, cell, run, rs);

  std::vector<Tensor*> params = features.parameters(true);
  std::vector<Tensor> analytic;
  for (auto& layer : g.feature_grads)
    for (auto& t : layer) analytic.push_back(t);
  for (Tensor* p : cell.parameters()) params.push_back(p);
  for (auto& t : g.rnn.params) analytic.push_back(t);
  for (std::size_t t = 0; t < steps; ++t) {
    params.push_back(&frames[t]);
    analytic.push_back(g.grad_frames[t]);
  }
  loss_fn();
  return run_check(loss_fn, params, analytic, [&] { return sig; });
}

std::uint64_t stack_signature(const Network& net, const Tensor& x, Tensor* out = nullptr) {
  Rng unused(0);
  NetForward f = forward(net, x, Mode::training, unused);
  if (out) *out = f.output;
  return kink_signature(net, f.caches);
}

GradCheckResult gan_generator_case(std::uint64_t seed) {
  Rng rng(seed);
  GanPair pair = make_gan(2, 2, {pick(rng, 2, 5)}, {pick(rng, 2, 5)}, seed);
  const Tensor z = sample_noise(pick(rng, 1, 4), 2, rng);
  std::uint64_t sig = 0;
  const auto loss_fn = [&] {
    sig = 0;
    for (std::size_t i = 0; i < z.extent(0); ++i) {
      Tensor sample;
      sig = mix(sig, stack_signature(pair.generator, unstack_one(z, i), &sample));
      sig = mix(sig, stack_signature(pair.discriminator, sample));
    }
    Rng unused(0);
    return generator_objective(pair, z, unused).loss;
  };
  Rng unused(0);
  const Objective obj = generator_objective(pair, z, unused);
  loss_fn();
  return run_check(loss_fn, pair.generator.parameters(true), obj.grads, [&] { return sig; });
}

GradCheckResult gan_discriminator_case(std::uint64_t seed) {
  Rng rng(seed);
  GanPair pair = make_gan(2, 2, {3}, {pick(rng, 2, 6), pick(rng, 2, 4)}, seed);
  const std::size_t b = pick(rng, 1, 4);
  const Tensor real = random_tensor({b, 2}, rng, -2.0, 2.0);
  const Tensor fake = random_tensor({b, 2}, rng, -2.0, 2.0);
  std::uint64_t sig = 0;
  const auto loss_fn = [&] {
    sig = 0;
    for (const Tensor* batch : {&real, &fake})
      for (std::size_t i = 0; i < b; ++i) sig = mix(sig, stack_signature(pair.discriminator, unstack_one(*batch, i)));
    Rng unused(0);
    return discriminator_objective(pair, real, fake, unused).loss;
  };
  Rng unused(0);
  const Objective obj = discriminator_objective(pair, real, fake, unused);
  loss_fn();
  return run_check(loss_fn, pair.discriminator.parameters(true), obj.grads, [&] { return sig; });
}

GradCheckResult autoencoder_case(std::uint64_t seed, bool variational) {
  Rng rng(seed);
  const std::size_t d = pick(rng, 3, 5), latent = pick(rng, 1, d - 1);
  AutoencoderPair pair = make_autoencoder(d, latent, {pick(rng, 2, 5)}, variational, rng.uniform(0.1, 2.0), seed);
  const Tensor x = random_tensor({d}, rng);
  const Tensor noise = random_tensor({latent}, rng, -2.0, 2.0);
  const AeMode mode = variational ? AeMode::variational : AeMode::plain;
  std::uint64_t sig = 0;
  const auto loss_fn = [&] {
    const AutoencodeResult r = autoencode(pair, x, mode, &noise);
    sig = mix(stack_signature(pair.encoder, x), stack_signature(pair.decoder, r.code));
    return r.total;
  };
  AutoencoderGrads g = autoencoder_gradients(pair, x, mode, &noise);
  std::vector<Tensor*> params = pair.encoder.parameters(true);
  std::vector<Tensor> analytic = g.encoder;
  for (Tensor* p : pair.decoder.parameters(true)) params.push_back(p);
  for (auto& t : g.decoder) analytic.push_back(t);
  loss_fn();
  return run_check(loss_fn, params, analytic, [&] { return sig; });
}

}  // namespace

std::vector<std::string> layer_cases() {
  return {"dense",   "conv2d",  "sepconv2d", "maxpool",     "avgpool", "relu",     "sigmoid", "tanh",
          "linear",  "softmax", "softmax2d", "dropout",     "upsample", "flatten"};
}

GradCheckResult layer_oracle(const std::string& name, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "oracle"));
  Architecture arch;
  arch.name = name;
  double lo = -1.0, hi = 1.0;
  if (name == "dense") {
    arch.input_shape = {pick(rng, 1, 6)};
    arch.layers = {dense(pick(rng, 1, 5))};
  } else if (name == "conv2d" || name == "sepconv2d") {
    const std::size_t k = pick(rng, 1, 3), p = pick(rng, 0, 1), s = pick(rng, 1, 2);
    const std::size_t min_extent = k > 2 * p ? k - 2 * p : 1;
    arch.input_shape = {pick(rng, 1, 3), pick(rng, min_extent, 6), pick(rng, min_extent, 6)};
    arch.layers = {conv(pick(rng, 1, 3), k, s, p, name == "conv2d" ? LayerKind::conv2d : LayerKind::sepconv2d)};
  } else if (name == "maxpool" || name == "avgpool") {
    const std::size_t size = pick(rng, 1, 3);
    arch.input_shape = {pick(rng, 1, 2), pick(rng, size, 6), pick(rng, size, 6)};
    arch.layers = {pool(name == "maxpool" ? LayerKind::maxpool : LayerKind::avgpool, size, pick(rng, 1, 3))};
  } else if (name == "relu" || name == "sigmoid" || name == "tanh" || name == "linear") {
    const Activation a = name == "relu"      ? Activation::relu
                         : name == "sigmoid" ? Activation::sigmoid
                         : name == "tanh"    ? Activation::tanh
                                             : Activation::linear;
    arch.input_shape = any_shape(rng);
    arch.layers = {act(a)};
    lo = -3.0;
    hi = 3.0;
  } else if (name == "softmax") {
    arch.input_shape = {pick(rng, 1, 6)};
    arch.layers = {spec_of(LayerKind::softmax)};
    lo = -3.0;
    hi = 3.0;
  } else if (name == "softmax2d") {
    arch.input_shape = {pick(rng, 2, 4), pick(rng, 1, 3), pick(rng, 1, 3)};
    arch.layers = {spec_of(LayerKind::softmax)};
    lo = -3.0;
    hi = 3.0;
  } else if (name == "dropout") {
    LayerSpec d = spec_of(LayerKind::dropout);
    d.rate = rng.uniform(0.0, 0.8);
    arch.input_shape = any_shape(rng);
    arch.layers = {d};
  } else if (name == "upsample") {
    LayerSpec u = spec_of(LayerKind::upsample);
    u.size = pick(rng, 1, 3);
    arch.input_shape = {pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3)};
    arch.layers = {u};
  } else if (name == "flatten") {
    arch.input_shape = {pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 1, 3)};
    arch.layers = {spec_of(LayerKind::flatten), dense(pick(rng, 1, 3))};
  } else {
    throw std::invalid_argument("unknown layer case " + name);
  }
  const Shape out = infer_shapes(arch).back();
  const Tensor x = random_tensor(arch.input_shape, rng, lo, hi);
  const Tensor target = random_tensor(out, rng);
  return check_network(arch, seed, x, target, LossKind::mean_squared_error);
}

std::vector<std::string> stack_cases() { return {"mlp", "convnet", "segmenter", "vgg-mini", "regularized"}; }

GradCheckResult stack_oracle(const std::string& name, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "oracle"));
  if (name == "mlp") {
    const std::size_t in = pick(rng, 2, 5), classes = pick(rng, 2, 4);
    const Architecture arch = mlp_preset(in, {pick(rng, 2, 6), pick(rng, 2, 6)}, classes, LayerKind::softmax);
    return check_network(arch, seed, random_tensor({in}, rng), one_hot(classes, rng),
                         LossKind::categorical_cross_entropy);
  }
  if (name == "convnet") {
    Architecture arch;
    arch.input_shape = {2, 6, 6};
    LayerSpec drop = spec_of(LayerKind::dropout);
    drop.rate = 0.25;
    arch.layers = {conv(3, 3, 1, 1),         act(Activation::relu), pool(LayerKind::maxpool, 2, 2),
                   conv(2, 2, 1, 0, LayerKind::sepconv2d), act(Activation::tanh), pool(LayerKind::avgpool, 2, 1),
                   spec_of(LayerKind::flatten), drop, dense(3), act(Activation::sigmoid)};
    Tensor target({3});
    for (auto& v : target.data()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return check_network(arch, seed, random_tensor(arch.input_shape, rng), target, LossKind::binary_cross_entropy);
  }
  if (name == "segmenter") {
    Architecture arch;
    arch.input_shape = {1, 6, 6};
    LayerSpec up = spec_of(LayerKind::upsample);
    up.size = 2;
    arch.layers = {conv(3, 3, 1, 1), act(Activation::relu), pool(LayerKind::maxpool, 2, 2), up,
                   conv(3, 1, 1, 0), spec_of(LayerKind::softmax)};
    return check_network(arch, seed, random_tensor(arch.input_shape, rng), one_hot_map(3, 6, 6, rng),
                         LossKind::categorical_cross_entropy);
  }
  if (name == "vgg-mini") {
    const Architecture arch = vgg_mini_preset(1, 8, 2, 2, 3);
    return check_network(arch, seed, random_tensor(arch.input_shape, rng), one_hot(3, rng),
                         LossKind::categorical_cross_entropy, 0.0, 8);
  }
  if (name == "regularized") {
    const Architecture arch = mlp_preset(3, {4}, 1);
    Tensor target({1}, rng.bernoulli(0.5) ? 1.0 : 0.0);
    return check_network(arch, seed, random_tensor({3}, rng), target, LossKind::binary_cross_entropy,
                         rng.uniform(0.001, 0.1));
  }
  throw std::invalid_argument("unknown stack case " + name);
}

std::vector<std::string> composite_cases() {
  return {"rnn", "gated", "cnn-rnn", "gan-generator", "gan-discriminator", "autoencoder", "vae"};
}

GradCheckResult composite_oracle(const std::string& name, std::uint64_t seed) {
  const std::uint64_t s = Rng::derive(seed, "oracle");
  if (name == "rnn") return rnn_case(s);
  if (name == "gated") return gated_case(s);
  if (name == "cnn-rnn") return cnn_rnn_case(s);
  if (name == "gan-generator") return gan_generator_case(s);
  if (name == "gan-discriminator") return gan_discriminator_case(s);
  if (name == "autoencoder") return autoencoder_case(s, false);
  if (name == "vae") return autoencoder_case(s, true);
  throw std::invalid_argument("unknown composite case " + name);
}

}  // namespace tinydl::test
