#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tinydl/data.hpp"
#include "tinydl/network.hpp"
#include "tinydl/optim.hpp"

namespace tinydl {

// --- adversarial pair ------------------------------------------------------------

struct GanPair {
  Network generator;      // [z] -> [d]
  Network discriminator;  // [d] -> [1], sigmoid head
  std::size_t noise = 0;  // z

  std::size_t sample_extent() const { return shape_size(generator.output_shape()); }
  void validate() const;
};

/// Dense generator (ReLU hidden, linear output) and discriminator (ReLU
/// hidden, sigmoid output) built from the "init" streams of `seed`.
GanPair make_gan(std::size_t noise, std::size_t sample, const std::vector<std::size_t>& g_hidden,
                 const std::vector<std::size_t>& d_hidden, std::uint64_t seed);

struct GanOptimizers {
  OptimizerState generator;
  OptimizerState discriminator;
};

GanOptimizers make_gan_optimizers(OptimizerKind kind, double g_lr, double d_lr);

struct Objective {
  double loss = 0.0;
  std::vector<Tensor> grads;  // aligned with parameters(true) of the network
  double accuracy = 0.0;      // discriminator only
};

/// Standard normal noise, [count, z].
Tensor sample_noise(std::size_t count, std::size_t z, Rng& rng);

/// Mean BCE over real (label 1) and fake (label 0) rows; gradients for the
/// discriminator's trainable parameters. Accuracy counts p >= 0.5 as "real".
Objective discriminator_objective(const GanPair& pair, const Tensor& real, const Tensor& fake, Rng& rng);
/// Mean of -log D(G(z)) over noise rows; gradients for the generator's
/// trainable parameters only (the discriminator is read-only here).
Objective generator_objective(const GanPair& pair, const Tensor& noise, Rng& rng);

struct GanStepResult {
  double d_loss = 0.0;
  double g_loss = 0.0;
  double d_accuracy = 0.0;  // measured before the discriminator update
};

/// One discriminator update on `real` vs fresh fakes, then one generator
/// update on fresh noise. Frozen layers are never touched.
GanStepResult gan_train_step(GanPair& pair, const Tensor& real, Rng& rng, GanOptimizers& opt);

/// Generator applied to `count` fresh noise rows, [count, d].
Tensor gan_sample(const GanPair& pair, std::size_t count, Rng& rng);

/// Accuracy of the discriminator on `real` plus an equal number of fresh fakes.
double discriminator_accuracy(const GanPair& pair, const Tensor& real, Rng& rng);

struct GanTrainConfig {
  std::size_t steps = 5000;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::adaptive;
  double generator_lr = 0.05;
  double discriminator_lr = 0.05;
  std::uint64_t seed = 0;
};

struct GanRecord {
  std::size_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double d_accuracy = 0.0;
};

struct GanHistory {
  std::vector<GanRecord> records;
  void write_csv(std::ostream& out) const;
};

/// Trains on rows of `data` [N, d]; batches are drawn from the "batches"
/// stream and noise from the "noise" stream of the seed.
GanHistory train_gan(GanPair& pair, const Tensor& data, const GanTrainConfig& cfg);

// --- autoencoders ----------------------------------------------------------------

struct AutoencoderPair {
  Network encoder;  // [d] -> [L] (plain) or [2L] (variational: mean, log-spread)
  Network decoder;  // [L] -> [d]
  std::size_t latent = 0;
  bool variational = false;
  double beta = 1.0;
  /// Allows L == d, used only for the identity sanity configuration.
  bool diagnostic = false;

  std::size_t input_extent() const { return shape_size(encoder.input_shape()); }
  void validate() const;
};

AutoencoderPair make_autoencoder(std::size_t input, std::size_t latent, const std::vector<std::size_t>& hidden,
                                 bool variational, double beta, std::uint64_t seed);

enum class AeMode {
  plain,        // code = latent mean, no latent term
  variational,  // code = mean + exp(log_spread) * noise, plus beta * divergence
};

struct AutoencodeResult {
  Tensor reconstruction;
  Tensor code;        // z fed to the decoder
  Tensor mean;        // latent mean
  Tensor log_spread;  // empty-shaped [1] zero for plain encoders
  double reconstruction_loss = 0.0;  // mean squared error
  double latent_loss = 0.0;          // divergence (unweighted)
  double total = 0.0;                // reconstruction + beta * latent (variational mode)
};

/// Divergence of N(mean, exp(log_spread)^2) from N(0, 1), summed over
/// coordinates: 0.5 * sum(mean^2 + exp(2s) - 1 - 2s).
double latent_divergence(const Tensor& mean, const Tensor& log_spread);

/// `noise` (the reparameterization draw, [L]) is required in variational
/// mode; pass zeros for a deterministic pass.
AutoencodeResult autoencode(const AutoencoderPair& pair, const Tensor& x, AeMode mode,
                            const Tensor* noise = nullptr);

struct AutoencoderGrads {
  AutoencodeResult result;
  std::vector<Tensor> encoder;  // aligned with encoder.parameters(true)
  std::vector<Tensor> decoder;  // aligned with decoder.parameters(true)
};

AutoencoderGrads autoencoder_gradients(const AutoencoderPair& pair, const Tensor& x, AeMode mode,
                                       const Tensor* noise = nullptr);

/// Decoder applied to `count` standard normal latent draws, [count, d].
Tensor vae_generate(const AutoencoderPair& pair, std::size_t count, Rng& rng);
/// Decoder output for an explicit latent code.
Tensor decode(const AutoencoderPair& pair, const Tensor& code);

struct AeTrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adaptive;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

struct AeRecord {
  std::size_t step = 0;
  double reconstruction = 0.0;
  double latent = 0.0;
  double total = 0.0;
};

struct AeHistory {
  std::vector<AeRecord> records;
  void write_csv(std::ostream& out) const;
};

/// Mode follows pair.variational; noise comes from the "noise" stream.
AeHistory train_autoencoder(AutoencoderPair& pair, const Tensor& data, const AeTrainConfig& cfg);

}  // namespace tinydl
