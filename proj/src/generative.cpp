#include "tinydl/generative.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "tinydl/architecture.hpp"
#include "tinydl/errors.hpp"

namespace tinydl {

namespace {

LayerSpec dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec act(Activation a) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = a;
  return s;
}

Architecture dense_stack(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden,
                         std::size_t out, std::optional<Activation> head) {
  Architecture a;
  a.name = name;
  a.input_shape = {in};
  for (auto h : hidden) {
    a.layers.push_back(dense(h));
    a.layers.push_back(act(Activation::relu));
  }
  a.layers.push_back(dense(out));
  if (head) a.layers.push_back(act(*head));
  return a;
}

Tensor row(const Tensor& m, std::size_t i) { return unstack_one(m, i); }

std::vector<Tensor> zero_grads(const Network& net) {
  std::vector<Tensor> out;
  for (const Tensor* p : net.parameters(true)) out.emplace_back(p->shape());
  return out;
}

void accumulate(std::vector<Tensor>& into, const std::vector<Tensor>& g) {
  for (std::size_t k = 0; k < into.size(); ++k) into[k] += g[k];
}

bool is_sigmoid_head(const Network& net) {
  if (net.size() == 0) return false;
  const LayerSpec s = net.layer(net.size() - 1).spec();
  return s.kind == LayerKind::activation && s.activation == Activation::sigmoid;
}

void check_rows(const Tensor& batch, std::size_t d, const char* what) {
  if (batch.rank() != 2 || batch.extent(0) == 0 || batch.extent(1) != d) {
    throw DimensionError(std::string(what) + ": expected [B, " + std::to_string(d) + "], got " +
                         to_string(batch.shape()));
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

// --- adversarial pair ------------------------------------------------------------

void GanPair::validate() const {
  if (generator.input_shape() != Shape{noise}) throw ConfigError("gan: generator input must be [z]");
  if (discriminator.input_shape() != generator.output_shape()) {
    throw ConfigError("gan: generator output " + to_string(generator.output_shape()) +
                      " does not match discriminator input " + to_string(discriminator.input_shape()));
  }
  if (shape_size(discriminator.output_shape()) != 1 || !is_sigmoid_head(discriminator)) {
    throw ConfigError("gan: discriminator must end in a single sigmoid output");
  }
}

GanPair make_gan(std::size_t noise, std::size_t sample, const std::vector<std::size_t>& g_hidden,
                 const std::vector<std::size_t>& d_hidden, std::uint64_t seed) {
  GanPair pair{build_network(dense_stack("generator", noise, g_hidden, sample, std::nullopt),
                             Rng::derive(seed, "generator")),
               build_network(dense_stack("discriminator", sample, d_hidden, 1, Activation::sigmoid),
                             Rng::derive(seed, "discriminator")),
               noise};
  pair.validate();
  return pair;
}

GanOptimizers make_gan_optimizers(OptimizerKind kind, double g_lr, double d_lr) {
  GanOptimizers o;
  o.generator.kind = kind;
  o.generator.learning_rate = g_lr;
  o.discriminator.kind = kind;
  o.discriminator.learning_rate = d_lr;
  return o;
}

Tensor sample_noise(std::size_t count, std::size_t z, Rng& rng) {
  Tensor t({count, z});
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

Objective discriminator_objective(const GanPair& pair, const Tensor& real, const Tensor& fake, Rng& rng) {
  const std::size_t d = pair.sample_extent();
  check_rows(real, d, "discriminator real batch");
  check_rows(fake, d, "discriminator fake batch");
  Objective obj;
  obj.grads = zero_grads(pair.discriminator);
  const std::size_t total = real.extent(0) + fake.extent(0);
  const double inv = 1.0 / static_cast<double>(total);
  std::size_t correct = 0;
  for (int label = 1; label >= 0; --label) {
    const Tensor& batch = label ? real : fake;
    for (std::size_t i = 0; i < batch.extent(0); ++i) {
      NetForward f = forward(pair.discriminator, row(batch, i), Mode::training, rng);
      const double p = f.output[0];
      correct += (p >= 0.5) == (label == 1);
      const LossValue lv = loss(LossKind::binary_cross_entropy, f.output, Tensor({1}, static_cast<double>(label)));
      obj.loss += lv.value * inv;
      accumulate(obj.grads, flatten_grads(pair.discriminator, backward(pair.discriminator, f.caches, scale(lv.grad, inv)), true));
    }
  }
  obj.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return obj;
}

Objective generator_objective(const GanPair& pair, const Tensor& noise, Rng& rng) {
  check_rows(noise, pair.noise, "generator noise batch");
  Objective obj;
  obj.grads = zero_grads(pair.generator);
  const std::size_t b = noise.extent(0);
  const double inv = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    NetForward g = forward(pair.generator, row(noise, i), Mode::training, rng);
    NetForward dsc = forward(pair.discriminator, g.output, Mode::training, rng);
    const double p = clamp_prob(dsc.output[0]);
    obj.loss -= std::log(p) * inv;
    // d(-log p)/dp, with the clamp treated as identity like the BCE loss.
    const Tensor grad_p({1}, -inv / p);
    NetBackward db = backward(pair.discriminator, dsc.caches, grad_p);
    accumulate(obj.grads, flatten_grads(pair.generator, backward(pair.generator, g.caches, db.grad_input), true));
  }
  return obj;
}

GanStepResult gan_train_step(GanPair& pair, const Tensor& real, Rng& rng, GanOptimizers& opt) {
  pair.validate();
  const std::size_t b = real.extent(0);
  GanStepResult r;

  const Tensor fake = gan_sample(pair, b, rng);
  Objective d = discriminator_objective(pair, real, fake, rng);
  if (!std::isfinite(d.loss)) throw TrainingError("discriminator loss is not finite", 0, static_cast<int>(opt.discriminator.iteration));
  optimizer_step(opt.discriminator, pair.discriminator.parameters(true), d.grads);

  const Tensor z = sample_noise(b, pair.noise, rng);
  Objective g = generator_objective(pair, z, rng);
  if (!std::isfinite(g.loss)) throw TrainingError("generator loss is not finite", 0, static_cast<int>(opt.generator.iteration));
  optimizer_step(opt.generator, pair.generator.parameters(true), g.grads);

  r.d_loss = d.loss;
  r.g_loss = g.loss;
  r.d_accuracy = d.accuracy;
  return r;
}

Tensor gan_sample(const GanPair& pair, std::size_t count, Rng& rng) {
  if (count < 1) throw ConfigError("gan_sample: count must be at least 1");
  const Tensor z = sample_noise(count, pair.noise, rng);
  std::vector<Tensor> rows;
  rows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) rows.push_back(flatten(predict(pair.generator, row(z, i))));
  return stack(rows);
}

double discriminator_accuracy(const GanPair& pair, const Tensor& real, Rng& rng) {
  const Tensor fake = gan_sample(pair, real.extent(0), rng);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < real.extent(0); ++i) {
    correct += predict(pair.discriminator, row(real, i))[0] >= 0.5;
    correct += predict(pair.discriminator, row(fake, i))[0] < 0.5;
  }
  return static_cast<double>(correct) / static_cast<double>(2 * real.extent(0));
}

void GanHistory::write_csv(std::ostream& out) const {
  out << "step,d_loss,g_loss,d_accuracy\n" << std::setprecision(17);
  for (const auto& r : records) out << r.step << ',' << r.d_loss << ',' << r.g_loss << ',' << r.d_accuracy << '\n';
}

GanHistory train_gan(GanPair& pair, const Tensor& data, const GanTrainConfig& cfg) {
  pair.validate();
  check_rows(data, pair.sample_extent(), "gan training data");
  if (cfg.steps < 1 || cfg.batch_size < 1) throw ConfigError("gan: steps and batch size must be positive");
  GanOptimizers opt = make_gan_optimizers(cfg.optimizer, cfg.generator_lr, cfg.discriminator_lr);
  const BatchPlan plan{std::min(cfg.batch_size, data.extent(0)), true, Rng::derive(cfg.seed, "batches")};
  Rng noise(Rng::derive(cfg.seed, "noise"));
  GanHistory hist;
  std::size_t epoch = 0, next = 0;
  auto batches = make_batches(data.extent(0), plan, epoch);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    if (next == batches.size()) {
      batches = make_batches(data.extent(0), plan, ++epoch);
      next = 0;
    }
    std::vector<Tensor> rows;
    for (auto idx : batches[next++]) rows.push_back(row(data, idx));
    const GanStepResult r = gan_train_step(pair, stack(rows), noise, opt);
    hist.records.push_back({step, r.d_loss, r.g_loss, r.d_accuracy});
  }
  return hist;
}

// --- autoencoders ----------------------------------------------------------------

void AutoencoderPair::validate() const {
  const std::size_t d = input_extent();
  if (latent < 1) throw ConfigError("autoencoder: latent extent must be positive");
  if (latent > d || (latent == d && !diagnostic)) {
    throw ConfigError("autoencoder: latent extent " + std::to_string(latent) + " must be below the input extent " +
                      std::to_string(d));
  }
  if (!(beta >= 0.0)) throw ConfigError("autoencoder: beta must be non-negative");
  const std::size_t code = shape_size(encoder.output_shape());
  if (code != latent && code != 2 * latent) {
    throw ConfigError("autoencoder: encoder must emit L or 2L values, got " + std::to_string(code));
  }
  if (variational && code != 2 * latent) throw ConfigError("autoencoder: variational encoder must emit 2L values");
  if (decoder.input_shape() != Shape{latent}) throw ConfigError("autoencoder: decoder input must be [L]");
  if (decoder.output_shape() != encoder.input_shape()) {
    throw ConfigError("autoencoder: decoder output " + to_string(decoder.output_shape()) + " must match input " +
                      to_string(encoder.input_shape()));
  }
}

AutoencoderPair make_autoencoder(std::size_t input, std::size_t latent, const std::vector<std::size_t>& hidden,
                                 bool variational, double beta, std::uint64_t seed) {
  std::vector<std::size_t> back(hidden.rbegin(), hidden.rend());
  AutoencoderPair pair{
      build_network(dense_stack("encoder", input, hidden, variational ? 2 * latent : latent, std::nullopt),
                    Rng::derive(seed, "encoder")),
      build_network(dense_stack("decoder", latent, back, input, std::nullopt), Rng::derive(seed, "decoder")),
      latent, variational, beta, false};
  pair.validate();
  return pair;
}

double latent_divergence(const Tensor& mean, const Tensor& log_spread) {
  require_same_shape(mean, log_spread, "latent_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double s = log_spread[i];
    kl += mean[i] * mean[i] + std::exp(2.0 * s) - 1.0 - 2.0 * s;
  }
  return 0.5 * kl;
}

namespace {

struct AeForward {
  AutoencodeResult result;
  NetForward enc;
  NetForward dec;
};

AeForward ae_forward(const AutoencoderPair& pair, const Tensor& x, AeMode mode, const Tensor* noise) {
  pair.validate();
  const std::size_t L = pair.latent;
  const bool two = shape_size(pair.encoder.output_shape()) == 2 * L;
  if (mode == AeMode::variational) {
    if (!two) throw ConfigError("autoencode: variational mode needs an encoder emitting mean and log-spread");
    if (!noise) throw ConfigError("autoencode: variational mode needs a noise draw");
    if (noise->shape() != Shape{L}) throw DimensionError("autoencode: noise must be [L]");
  }
  Rng unused(0);
  AeForward f;
  f.enc = forward(pair.encoder, x, Mode::training, unused);
  const Tensor h = flatten(f.enc.output);
  AutoencodeResult& r = f.result;
  r.mean = Tensor({L});
  r.log_spread = Tensor({L});
  for (std::size_t i = 0; i < L; ++i) {
    r.mean[i] = h[i];
    if (two) r.log_spread[i] = h[L + i];
  }
  r.code = r.mean;
  if (mode == AeMode::variational) {
    for (std::size_t i = 0; i < L; ++i) r.code[i] = r.mean[i] + std::exp(r.log_spread[i]) * (*noise)[i];
  }
  f.dec = forward(pair.decoder, r.code, Mode::training, unused);
  r.reconstruction = f.dec.output;
  r.reconstruction_loss = loss(LossKind::mean_squared_error, r.reconstruction, x).value;
  r.total = r.reconstruction_loss;
  if (mode == AeMode::variational) {
    r.latent_loss = latent_divergence(r.mean, r.log_spread);
    r.total += pair.beta * r.latent_loss;
  }
  return f;
}

}  // namespace

AutoencodeResult autoencode(const AutoencoderPair& pair, const Tensor& x, AeMode mode, const Tensor* noise) {
  return ae_forward(pair, x, mode, noise).result;
}

AutoencoderGrads autoencoder_gradients(const AutoencoderPair& pair, const Tensor& x, AeMode mode,
                                       const Tensor* noise) {
  AeForward f = ae_forward(pair, x, mode, noise);
  const std::size_t L = pair.latent;
  const AutoencodeResult& r = f.result;
  const Tensor grad_rec = loss(LossKind::mean_squared_error, r.reconstruction, x).grad;
  NetBackward db = backward(pair.decoder, f.dec.caches, grad_rec);
  const Tensor& dz = db.grad_input;

  Tensor dh(Shape{shape_size(pair.encoder.output_shape())});
  for (std::size_t i = 0; i < L; ++i) {
    dh[i] = dz[i];
    if (mode == AeMode::variational) {
      const double spread = std::exp(r.log_spread[i]);
      dh[i] += pair.beta * r.mean[i];
      dh[L + i] = dz[i] * spread * (*noise)[i] + pair.beta * (spread * spread - 1.0);
    }
  }
  NetBackward eb = backward(pair.encoder, f.enc.caches, dh.reshaped(pair.encoder.output_shape()));
  AutoencoderGrads g;
  g.result = r;
  g.encoder = flatten_grads(pair.encoder, std::move(eb), true);
  g.decoder = flatten_grads(pair.decoder, std::move(db), true);
  return g;
}

Tensor decode(const AutoencoderPair& pair, const Tensor& code) { return predict(pair.decoder, code); }

Tensor vae_generate(const AutoencoderPair& pair, std::size_t count, Rng& rng) {
  if (count < 1) throw ConfigError("vae_generate: count must be at least 1");
  const Tensor z = sample_noise(count, pair.latent, rng);
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < count; ++i) rows.push_back(flatten(decode(pair, row(z, i))));
  return stack(rows);
}

void AeHistory::write_csv(std::ostream& out) const {
  out << "step,reconstruction,latent,total\n" << std::setprecision(17);
  for (const auto& r : records) out << r.step << ',' << r.reconstruction << ',' << r.latent << ',' << r.total << '\n';
}

AeHistory train_autoencoder(AutoencoderPair& pair, const Tensor& data, const AeTrainConfig& cfg) {
  pair.validate();
  check_rows(data, pair.input_extent(), "autoencoder training data");
  if (cfg.steps < 1 || cfg.batch_size < 1) throw ConfigError("autoencoder: steps and batch size must be positive");
  OptimizerState enc_opt, dec_opt;
  enc_opt.kind = dec_opt.kind = cfg.optimizer;
  enc_opt.learning_rate = dec_opt.learning_rate = cfg.learning_rate;
  const BatchPlan plan{std::min(cfg.batch_size, data.extent(0)), true, Rng::derive(cfg.seed, "batches")};
  Rng noise_rng(Rng::derive(cfg.seed, "noise"));
  const AeMode mode = pair.variational ? AeMode::variational : AeMode::plain;
  AeHistory hist;
  std::size_t epoch = 0, next = 0;
  auto batches = make_batches(data.extent(0), plan, epoch);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    if (next == batches.size()) {
      batches = make_batches(data.extent(0), plan, ++epoch);
      next = 0;
    }
    std::vector<std::size_t> batch = batches[next++];
    std::sort(batch.begin(), batch.end());
    std::vector<Tensor> eg = zero_grads(pair.encoder), dg = zero_grads(pair.decoder);
    AeRecord rec{step, 0.0, 0.0, 0.0};
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto idx : batch) {
      std::optional<Tensor> eps;
      if (mode == AeMode::variational) eps = flatten(sample_noise(1, pair.latent, noise_rng));
      AutoencoderGrads g = autoencoder_gradients(pair, row(data, idx), mode, eps ? &*eps : nullptr);
      accumulate(eg, g.encoder);
      accumulate(dg, g.decoder);
      rec.reconstruction += g.result.reconstruction_loss * inv;
      rec.latent += g.result.latent_loss * inv;
      rec.total += g.result.total * inv;
    }
    for (auto& t : eg) t *= inv;
    for (auto& t : dg) t *= inv;
    if (!std::isfinite(rec.total)) throw TrainingError("autoencoder loss is not finite", static_cast<int>(epoch + 1), static_cast<int>(step));
    optimizer_step(enc_opt, pair.encoder.parameters(true), eg);
    optimizer_step(dec_opt, pair.decoder.parameters(true), dg);
    hist.records.push_back(rec);
  }
  return hist;
}

}  // namespace tinydl
