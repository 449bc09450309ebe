#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tinydl/data.hpp"
#include "tinydl/losses.hpp"
#include "tinydl/network.hpp"
#include "tinydl/optim.hpp"

namespace tinydl {

/// Elman cell: h = act(W_xh x + W_hh h_prev + b_h), y = W_hy h + b_y.
struct RnnCell {
  Tensor w_xh;  // [h, n]
  Tensor w_hh;  // [h, h]
  Tensor b_h;   // [h]
  Tensor w_hy;  // [o, h]
  Tensor b_y;   // [o]
  /// tanh normally; linear is used by the gradient-flow diagnostics.
  Activation hidden = Activation::tanh;

  std::size_t inputs() const { return w_xh.extent(1); }
  std::size_t hidden_size() const { return w_hh.extent(0); }
  std::size_t outputs() const { return w_hy.extent(0); }

  /// w_xh, w_hh, b_h, w_hy, b_y.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void validate() const;
};

/// Zero-initialized cell.
RnnCell zero_rnn_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs);
/// Weights uniform in +-1/sqrt(fan_in), biases zero.
RnnCell random_rnn_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng);

struct RnnStepCache {
  Tensor x;
  Tensor h_prev;
  Tensor h;
};

struct RnnStep {
  Tensor y;
  Tensor h;
  RnnStepCache cache;
};

RnnStep rnn_step(const RnnCell& cell, const Tensor& x, const Tensor& h_prev);

struct RnnUnroll {
  std::vector<Tensor> outputs;  // y_1..y_T
  std::vector<Tensor> states;   // h_1..h_T
  std::vector<RnnStepCache> caches;
  bool live = false;
};

/// `h0` defaults to zeros.
RnnUnroll unroll(const RnnCell& cell, std::span<const Tensor> inputs,
                 const std::optional<Tensor>& h0 = std::nullopt);

struct RnnGrads {
  std::vector<Tensor> params;  // aligned with RnnCell::parameters()
  Tensor grad_h0;
  std::vector<Tensor> grad_inputs;
};

/// Full backpropagation through time. `grad_outputs[t]` is dL/dy_t. Consumes
/// the unroll's caches; a second call throws StateError.
RnnGrads bptt(const RnnCell& cell, RnnUnroll& run, std::span<const Tensor> grad_outputs);

/// ||dL/dx_tau|| for tau = 1..T where L = sum of y_T. Inputs are drawn from
/// the probe seed; with a linear activation the profile does not depend on
/// them.
std::vector<double> gradient_flow_profile(const RnnCell& cell, std::size_t length,
                                          std::uint64_t probe_seed);

// --- gated cell ------------------------------------------------------------------

/// Long short-term memory cell over z = [x, h_prev]:
///   i = sig(W_i z + b_i), f = sig(W_f z + b_f), o = sig(W_o z + b_o),
///   g = tanh(W_g z + b_g), c = f*c_prev + i*g, h = o*tanh(c),
///   y = W_hy h + b_y.
struct GatedCell {
  Tensor w_i, w_f, w_o, w_g;  // [h, n+h]
  Tensor b_i, b_f, b_o, b_g;  // [h]
  Tensor w_hy;                // [o, h]
  Tensor b_y;                 // [o]

  std::size_t inputs() const { return w_i.extent(1) - w_i.extent(0); }
  std::size_t hidden_size() const { return w_i.extent(0); }
  std::size_t outputs() const { return w_hy.extent(0); }

  /// w_i, w_f, w_o, w_g, b_i, b_f, b_o, b_g, w_hy, b_y.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  void validate() const;
};

GatedCell random_gated_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng);

struct GatedStepCache {
  Tensor z, c_prev, i, f, o, g, c, h;
};

struct GatedStep {
  Tensor y;
  Tensor h;
  Tensor c;
  GatedStepCache cache;
};

GatedStep gated_step(const GatedCell& cell, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev);

struct GatedUnroll {
  std::vector<Tensor> outputs;
  std::vector<Tensor> states;
  std::vector<Tensor> memories;
  std::vector<GatedStepCache> caches;
  bool live = false;
};

GatedUnroll gated_unroll(const GatedCell& cell, std::span<const Tensor> inputs,
                         const std::optional<Tensor>& h0 = std::nullopt,
                         const std::optional<Tensor>& c0 = std::nullopt);

struct GatedGrads {
  std::vector<Tensor> params;  // aligned with GatedCell::parameters()
  Tensor grad_h0;
  Tensor grad_c0;
  std::vector<Tensor> grad_inputs;
};

GatedGrads gated_bptt(const GatedCell& cell, GatedUnroll& run, std::span<const Tensor> grad_outputs);

// --- sequences -------------------------------------------------------------------

/// Rows of a [T, n] tensor as T rank-1 steps.
std::vector<Tensor> sequence_steps(const Tensor& seq);

/// Loss on cell outputs treated as logits. BCE applies a sigmoid first and
/// returns dL/dlogit = (sigmoid(y) - t) / size; MSE uses the raw outputs.
LossValue logit_loss(LossKind kind, const Tensor& y, const Tensor& target);

struct SequenceTrainConfig {
  std::size_t steps = 2000;  // optimizer updates
  std::size_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::adaptive;
  double learning_rate = 0.1;
  LossKind loss = LossKind::binary_cross_entropy;
  std::uint64_t seed = 0;
  /// Evaluate every this many steps and stop once accuracy reaches
  /// `target_accuracy` (0 disables).
  std::size_t eval_every = 50;
  double target_accuracy = 0.0;
};

struct SequenceRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;  // -1 when not evaluated at this step
};

struct SequenceHistory {
  std::vector<SequenceRecord> records;
  std::size_t steps_run = 0;
  double final_accuracy = 0.0;
};

/// Sequence accuracy: fraction of sequences whose final-step decision
/// (output > 0 as logit, i.e. probability > 0.5) matches the final target.
/// Targets are [T, o] (per-step supervision) or [o] (final step only).
double sequence_accuracy(const RnnCell& cell, const Dataset& data);

SequenceHistory train_sequence(RnnCell& cell, const Dataset& data, const SequenceTrainConfig& cfg);

// --- CNN features into an RNN ----------------------------------------------------

struct CnnRnnForward {
  std::vector<std::vector<LayerCache>> frame_caches;
  std::vector<Shape> feature_shapes;
  RnnUnroll rnn;
};

/// Per-frame feature extraction followed by unroll. The feature network's
/// output must have as many elements as the cell has inputs.
CnnRnnForward cnn_then_rnn(const Network& features, const RnnCell& cell,
                           std::span<const Tensor> frames, Mode mode, Rng& rng);

struct CnnRnnGrads {
  /// Per layer of the feature network, summed over frames (frozen: zeros).
  std::vector<std::vector<Tensor>> feature_grads;
  RnnGrads rnn;
  std::vector<Tensor> grad_frames;
};

CnnRnnGrads cnn_rnn_backward(const Network& features, const RnnCell& cell, CnnRnnForward& run,
                             std::span<const Tensor> grad_outputs);

}  // namespace tinydl
