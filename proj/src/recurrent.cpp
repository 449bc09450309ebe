#include "tinydl/recurrent.hpp"

#include <algorithm>
#include <cmath>

#include "tinydl/errors.hpp"

namespace tinydl {

namespace {

// W^T v for W [m,n], v [m].
Tensor matvec_t(const Tensor& w, const Tensor& v) {
  const std::size_t m = w.extent(0), n = w.extent(1);
  Tensor out({n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = w.raw() + i * n;
    const double vi = v[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += row[j] * vi;
  }
  return out;
}

// G += u v^T.
void add_outer(Tensor& g, const Tensor& u, const Tensor& v) {
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < u.size(); ++i) {
    double* row = g.raw() + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += u[i] * v[j];
  }
}

double sigmoid(double x) { return activate(Activation::sigmoid, x); }

// Derivative of the hidden activation given its output.
double act_grad_from_output(Activation a, double h) {
  switch (a) {
    case Activation::tanh: return 1.0 - h * h;
    case Activation::linear: return 1.0;
    default: throw UnsupportedError("recurrent cells support tanh or linear hidden activations");
  }
}

void require_rank1(const Tensor& t, std::size_t n, const char* what) {
  if (t.rank() != 1 || t.size() != n) {
    throw DimensionError(std::string(what) + ": expected [" + std::to_string(n) + "], got " + to_string(t.shape()));
  }
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

std::vector<Tensor> zeros_like(const std::vector<const Tensor*>& params) {
  std::vector<Tensor> out;
  for (const Tensor* p : params) out.emplace_back(p->shape());
  return out;
}

}  // namespace

// --- Elman cell ------------------------------------------------------------------

std::vector<Tensor*> RnnCell::parameters() { return {&w_xh, &w_hh, &b_h, &w_hy, &b_y}; }
std::vector<const Tensor*> RnnCell::parameters() const { return {&w_xh, &w_hh, &b_h, &w_hy, &b_y}; }

void RnnCell::validate() const {
  if (w_xh.rank() != 2 || w_hh.rank() != 2 || w_hy.rank() != 2 || b_h.rank() != 1 || b_y.rank() != 1) {
    throw DimensionError("rnn cell: weights must be matrices and biases vectors");
  }
  const std::size_t h = w_hh.extent(0);
  if (w_hh.extent(1) != h) throw DimensionError("rnn cell: recurrence matrix must be square, got " + to_string(w_hh.shape()));
  if (w_xh.extent(0) != h || b_h.size() != h || w_hy.extent(1) != h || b_y.size() != w_hy.extent(0)) {
    throw DimensionError("rnn cell: inconsistent extents");
  }
}

RnnCell zero_rnn_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs) {
  if (!inputs || !hidden || !outputs) throw ConfigError("rnn cell extents must be positive");
  return RnnCell{Tensor({hidden, inputs}), Tensor({hidden, hidden}), Tensor({hidden}), Tensor({outputs, hidden}),
                 Tensor({outputs}), Activation::tanh};
}

RnnCell random_rnn_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng) {
  RnnCell c = zero_rnn_cell(inputs, hidden, outputs);
  c.w_xh = uniform_tensor(c.w_xh.shape(), 1.0 / std::sqrt(static_cast<double>(inputs)), rng);
  c.w_hh = uniform_tensor(c.w_hh.shape(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  c.w_hy = uniform_tensor(c.w_hy.shape(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return c;
}

RnnStep rnn_step(const RnnCell& cell, const Tensor& x, const Tensor& h_prev) {
  require_rank1(x, cell.inputs(), "rnn_step input");
  require_rank1(h_prev, cell.hidden_size(), "rnn_step hidden state");
  Tensor pre = affine(cell.w_xh, x, cell.b_h);
  pre += affine(cell.w_hh, h_prev, Tensor({cell.hidden_size()}));
  Tensor h = activate(cell.hidden, pre);
  Tensor y = affine(cell.w_hy, h, cell.b_y);
  return {y, h, {x, h_prev, h}};
}

RnnUnroll unroll(const RnnCell& cell, std::span<const Tensor> inputs, const std::optional<Tensor>& h0) {
  cell.validate();
  if (inputs.empty()) throw ConfigError("unroll: sequence must have at least one step");
  RnnUnroll run;
  Tensor h = h0 ? *h0 : Tensor({cell.hidden_size()});
  require_rank1(h, cell.hidden_size(), "unroll initial state");
  for (const Tensor& x : inputs) {
    RnnStep s = rnn_step(cell, x, h);
    h = s.h;
    run.outputs.push_back(std::move(s.y));
    run.states.push_back(h);
    run.caches.push_back(std::move(s.cache));
  }
  run.live = true;
  return run;
}

RnnGrads bptt(const RnnCell& cell, RnnUnroll& run, std::span<const Tensor> grad_outputs) {
  if (!run.live) throw StateError("bptt: caches are stale or absent (run unroll first)");
  const std::size_t steps = run.caches.size();
  if (grad_outputs.size() != steps) {
    throw DimensionError("bptt: " + std::to_string(grad_outputs.size()) + " output gradients for " +
                         std::to_string(steps) + " steps");
  }
  RnnGrads g;
  g.params = zeros_like(cell.parameters());
  g.grad_inputs.resize(steps);
  Tensor dh_next({cell.hidden_size()});
  for (std::size_t t = steps; t-- > 0;) {
    const RnnStepCache& c = run.caches[t];
    const Tensor& dy = grad_outputs[t];
    require_rank1(dy, cell.outputs(), "bptt output gradient");
    add_outer(g.params[3], dy, c.h);
    g.params[4] += dy;
    Tensor dh = matvec_t(cell.w_hy, dy);
    dh += dh_next;
    Tensor da(dh.shape());
    for (std::size_t i = 0; i < da.size(); ++i) da[i] = dh[i] * act_grad_from_output(cell.hidden, c.h[i]);
    add_outer(g.params[0], da, c.x);
    add_outer(g.params[1], da, c.h_prev);
    g.params[2] += da;
    g.grad_inputs[t] = matvec_t(cell.w_xh, da);
    dh_next = matvec_t(cell.w_hh, da);
  }
  g.grad_h0 = dh_next;
  run.live = false;
  run.caches.clear();
  return g;
}

std::vector<double> gradient_flow_profile(const RnnCell& cell, std::size_t length, std::uint64_t probe_seed) {
  if (length < 2) throw ConfigError("gradient_flow_profile: length must be at least 2");
  cell.validate();
  Rng rng(probe_seed);
  std::vector<Tensor> xs;
  for (std::size_t t = 0; t < length; ++t) xs.push_back(uniform_tensor({cell.inputs()}, 1.0, rng));
  RnnUnroll run = unroll(cell, xs);
  std::vector<Tensor> dys(length, Tensor({cell.outputs()}));
  dys.back().fill(1.0);
  const RnnGrads g = bptt(cell, run, dys);
  std::vector<double> norms;
  for (const Tensor& dx : g.grad_inputs) norms.push_back(std::sqrt(sum_squares(dx)));
  return norms;
}

// --- gated cell ------------------------------------------------------------------

std::vector<Tensor*> GatedCell::parameters() {
  return {&w_i, &w_f, &w_o, &w_g, &b_i, &b_f, &b_o, &b_g, &w_hy, &b_y};
}
std::vector<const Tensor*> GatedCell::parameters() const {
  return {&w_i, &w_f, &w_o, &w_g, &b_i, &b_f, &b_o, &b_g, &w_hy, &b_y};
}

void GatedCell::validate() const {
  for (const Tensor* w : {&w_f, &w_o, &w_g}) {
    if (w->shape() != w_i.shape()) throw DimensionError("gated cell: gate weights must share one shape");
  }
  for (const Tensor* b : {&b_f, &b_o, &b_g}) {
    if (b->shape() != b_i.shape()) throw DimensionError("gated cell: gate biases must share one shape");
  }
  if (w_i.rank() != 2 || w_i.extent(1) <= w_i.extent(0) || b_i.rank() != 1 || b_i.size() != w_i.extent(0)) {
    throw DimensionError("gated cell: gate weights must be [h, n+h] with biases [h]");
  }
  if (w_hy.rank() != 2 || w_hy.extent(1) != w_i.extent(0) || b_y.rank() != 1 || b_y.size() != w_hy.extent(0)) {
    throw DimensionError("gated cell: output map must be [o, h] with bias [o]");
  }
}

GatedCell random_gated_cell(std::size_t inputs, std::size_t hidden, std::size_t outputs, Rng& rng) {
  if (!inputs || !hidden || !outputs) throw ConfigError("gated cell extents must be positive");
  const Shape ws{hidden, inputs + hidden};
  const double bound = 1.0 / std::sqrt(static_cast<double>(inputs + hidden));
  GatedCell c;
  c.w_i = uniform_tensor(ws, bound, rng);
  c.w_f = uniform_tensor(ws, bound, rng);
  c.w_o = uniform_tensor(ws, bound, rng);
  c.w_g = uniform_tensor(ws, bound, rng);
  c.b_i = Tensor({hidden});
  c.b_f = Tensor({hidden});
  c.b_o = Tensor({hidden});
  c.b_g = Tensor({hidden});
  c.w_hy = uniform_tensor({outputs, hidden}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  c.b_y = Tensor({outputs});
  return c;
}

GatedStep gated_step(const GatedCell& cell, const Tensor& x, const Tensor& h_prev, const Tensor& c_prev) {
  const std::size_t n = cell.inputs(), h = cell.hidden_size();
  require_rank1(x, n, "gated_step input");
  require_rank1(h_prev, h, "gated_step hidden state");
  require_rank1(c_prev, h, "gated_step memory");
  Tensor z({n + h});
  std::copy(x.data().begin(), x.data().end(), z.data().begin());
  std::copy(h_prev.data().begin(), h_prev.data().end(), z.data().begin() + static_cast<std::ptrdiff_t>(n));
  GatedStepCache k;
  k.z = z;
  k.c_prev = c_prev;
  k.i = activate(Activation::sigmoid, affine(cell.w_i, z, cell.b_i));
  k.f = activate(Activation::sigmoid, affine(cell.w_f, z, cell.b_f));
  k.o = activate(Activation::sigmoid, affine(cell.w_o, z, cell.b_o));
  k.g = activate(Activation::tanh, affine(cell.w_g, z, cell.b_g));
  k.c = Tensor({h});
  k.h = Tensor({h});
  for (std::size_t j = 0; j < h; ++j) {
    k.c[j] = k.f[j] * c_prev[j] + k.i[j] * k.g[j];
    k.h[j] = k.o[j] * std::tanh(k.c[j]);
  }
  Tensor y = affine(cell.w_hy, k.h, cell.b_y);
  return {y, k.h, k.c, std::move(k)};
}

GatedUnroll gated_unroll(const GatedCell& cell, std::span<const Tensor> inputs, const std::optional<Tensor>& h0,
                         const std::optional<Tensor>& c0) {
  cell.validate();
  if (inputs.empty()) throw ConfigError("gated_unroll: sequence must have at least one step");
  GatedUnroll run;
  Tensor h = h0 ? *h0 : Tensor({cell.hidden_size()});
  Tensor c = c0 ? *c0 : Tensor({cell.hidden_size()});
  for (const Tensor& x : inputs) {
    GatedStep s = gated_step(cell, x, h, c);
    h = s.h;
    c = s.c;
    run.outputs.push_back(std::move(s.y));
    run.states.push_back(h);
    run.memories.push_back(c);
    run.caches.push_back(std::move(s.cache));
  }
  run.live = true;
  return run;
}

GatedGrads gated_bptt(const GatedCell& cell, GatedUnroll& run, std::span<const Tensor> grad_outputs) {
  if (!run.live) throw StateError("gated_bptt: caches are stale or absent (run gated_unroll first)");
  const std::size_t steps = run.caches.size();
  if (grad_outputs.size() != steps) throw DimensionError("gated_bptt: one output gradient per step required");
  const std::size_t n = cell.inputs(), h = cell.hidden_size();
  GatedGrads g;
  g.params = zeros_like(cell.parameters());
  g.grad_inputs.resize(steps);
  Tensor dh_next({h}), dc_next({h});
  for (std::size_t t = steps; t-- > 0;) {
    const GatedStepCache& k = run.caches[t];
    const Tensor& dy = grad_outputs[t];
    require_rank1(dy, cell.outputs(), "gated_bptt output gradient");
    add_outer(g.params[8], dy, k.h);
    g.params[9] += dy;
    Tensor dh = matvec_t(cell.w_hy, dy);
    dh += dh_next;
    Tensor da_i({h}), da_f({h}), da_o({h}), da_g({h}), dc_prev({h});
    for (std::size_t j = 0; j < h; ++j) {
      const double tc = std::tanh(k.c[j]);
      const double dc = dc_next[j] + dh[j] * k.o[j] * (1.0 - tc * tc);
      da_o[j] = dh[j] * tc * k.o[j] * (1.0 - k.o[j]);
      da_i[j] = dc * k.g[j] * k.i[j] * (1.0 - k.i[j]);
      da_f[j] = dc * k.c_prev[j] * k.f[j] * (1.0 - k.f[j]);
      da_g[j] = dc * k.i[j] * (1.0 - k.g[j] * k.g[j]);
      dc_prev[j] = dc * k.f[j];
    }
    const Tensor* das[4] = {&da_i, &da_f, &da_o, &da_g};
    const Tensor* ws[4] = {&cell.w_i, &cell.w_f, &cell.w_o, &cell.w_g};
    Tensor dz({n + h});
    for (int q = 0; q < 4; ++q) {
      add_outer(g.params[q], *das[q], k.z);
      g.params[4 + q] += *das[q];
      dz += matvec_t(*ws[q], *das[q]);
    }
    g.grad_inputs[t] = Tensor({n}, std::vector<double>(dz.data().begin(), dz.data().begin() + static_cast<std::ptrdiff_t>(n)));
    dh_next = Tensor({h}, std::vector<double>(dz.data().begin() + static_cast<std::ptrdiff_t>(n), dz.data().end()));
    dc_next = dc_prev;
  }
  g.grad_h0 = dh_next;
  g.grad_c0 = dc_next;
  run.live = false;
  run.caches.clear();
  return g;
}

// --- sequences -------------------------------------------------------------------

std::vector<Tensor> sequence_steps(const Tensor& seq) {
  if (seq.rank() != 2) throw DimensionError("sequence tensors must be [T, n], got " + to_string(seq.shape()));
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < seq.extent(0); ++t) out.push_back(unstack_one(seq, t));
  return out;
}

LossValue logit_loss(LossKind kind, const Tensor& y, const Tensor& target) {
  require_same_shape(y, target, "logit_loss");
  if (kind != LossKind::binary_cross_entropy) return loss(kind, y, target);
  Tensor p(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = sigmoid(y[i]);
  LossValue lv = loss(kind, p, target);
  const double inv = 1.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) lv.grad[i] = (p[i] - target[i]) * inv;
  return lv;
}

namespace {

// Per-step targets for one example: a [T, o] target gives one row per step,
// an [o] target supervises the final step only.
std::vector<std::optional<Tensor>> step_targets(const Tensor& target, std::size_t steps) {
  std::vector<std::optional<Tensor>> out(steps);
  if (target.rank() == 2) {
    if (target.extent(0) != steps) throw DimensionError("per-step targets must have one row per input step");
    for (std::size_t t = 0; t < steps; ++t) out[t] = unstack_one(target, t);
  } else {
    out.back() = target;
  }
  return out;
}

}  // namespace

double sequence_accuracy(const RnnCell& cell, const Dataset& data) {
  if (data.empty()) throw ConfigError("sequence_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data.examples) {
    const auto xs = sequence_steps(ex.input);
    RnnUnroll run = unroll(cell, xs);
    const auto targets = step_targets(ex.target, xs.size());
    const Tensor& y = run.outputs.back();
    const Tensor& t = *targets.back();
    bool ok = true;
    for (std::size_t i = 0; i < y.size(); ++i) ok = ok && ((y[i] > 0.0) == (t[i] >= 0.5));
    correct += ok;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

SequenceHistory train_sequence(RnnCell& cell, const Dataset& data, const SequenceTrainConfig& cfg) {
  cell.validate();
  if (data.empty()) throw ConfigError("train_sequence: empty dataset");
  if (cfg.batch_size < 1 || cfg.steps < 1) throw ConfigError("train_sequence: steps and batch size must be positive");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("train_sequence: learning rate must be non-negative");
  OptimizerState opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  const BatchPlan plan{std::min(cfg.batch_size, data.size()), true, Rng::derive(cfg.seed, "batches")};
  auto params = cell.parameters();

  SequenceHistory hist;
  std::size_t epoch = 0;
  auto batches = make_batches(data.size(), plan, epoch);
  std::size_t next = 0;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    if (next == batches.size()) {
      batches = make_batches(data.size(), plan, ++epoch);
      next = 0;
    }
    std::vector<std::size_t> batch = batches[next++];
    std::sort(batch.begin(), batch.end());
    std::vector<Tensor> grads = zeros_like(std::as_const(cell).parameters());
    double batch_loss = 0.0;
    for (auto idx : batch) {
      const Example& ex = data.examples[idx];
      const auto xs = sequence_steps(ex.input);
      const auto targets = step_targets(ex.target, xs.size());
      RnnUnroll run = unroll(cell, xs);
      std::vector<Tensor> dys;
      std::size_t supervised = 0;
      for (const auto& t : targets) supervised += t.has_value();
      for (std::size_t t = 0; t < xs.size(); ++t) {
        if (!targets[t]) {
          dys.emplace_back(Shape{cell.outputs()});
          continue;
        }
        LossValue lv = logit_loss(cfg.loss, run.outputs[t], *targets[t]);
        batch_loss += lv.value / static_cast<double>(supervised);
        lv.grad *= 1.0 / static_cast<double>(supervised);
        dys.push_back(std::move(lv.grad));
      }
      RnnGrads g = bptt(cell, run, dys);
      for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += g.params[k];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    batch_loss *= inv;
    for (auto& g : grads) g *= inv;
    if (!std::isfinite(batch_loss)) {
      throw TrainingError("sequence training diverged", static_cast<int>(epoch + 1), static_cast<int>(step));
    }
    optimizer_step(opt, params, grads);

    SequenceRecord rec{step, batch_loss, -1.0};
    const bool evaluate_now = (cfg.eval_every && step % cfg.eval_every == 0) || step == cfg.steps;
    if (evaluate_now) rec.accuracy = sequence_accuracy(cell, data);
    hist.records.push_back(rec);
    hist.steps_run = step;
    if (evaluate_now) {
      hist.final_accuracy = rec.accuracy;
      if (cfg.target_accuracy > 0.0 && rec.accuracy >= cfg.target_accuracy) break;
    }
  }
  return hist;
}

// --- CNN features into an RNN ----------------------------------------------------

CnnRnnForward cnn_then_rnn(const Network& features, const RnnCell& cell, std::span<const Tensor> frames, Mode mode,
                           Rng& rng) {
  if (shape_size(features.output_shape()) != cell.inputs()) {
    throw ConfigError("cnn_then_rnn: feature network emits " + std::to_string(shape_size(features.output_shape())) +
                      " values but the cell takes " + std::to_string(cell.inputs()));
  }
  CnnRnnForward out;
  std::vector<Tensor> feats;
  for (const Tensor& frame : frames) {
    NetForward f = forward(features, frame, mode, rng);
    out.feature_shapes.push_back(f.output.shape());
    feats.push_back(flatten(f.output));
    out.frame_caches.push_back(std::move(f.caches));
  }
  out.rnn = unroll(cell, feats);
  return out;
}

CnnRnnGrads cnn_rnn_backward(const Network& features, const RnnCell& cell, CnnRnnForward& run,
                             std::span<const Tensor> grad_outputs) {
  CnnRnnGrads g;
  g.rnn = bptt(cell, run.rnn, grad_outputs);
  for (std::size_t i = 0; i < features.size(); ++i) {
    std::vector<Tensor> zeros;
    for (const Tensor& p : features.layer(i).params()) zeros.emplace_back(p.shape());
    g.feature_grads.push_back(std::move(zeros));
  }
  for (std::size_t t = 0; t < run.frame_caches.size(); ++t) {
    NetBackward nb = backward(features, run.frame_caches[t], g.rnn.grad_inputs[t].reshaped(run.feature_shapes[t]));
    for (std::size_t i = 0; i < nb.param_grads.size(); ++i) {
      for (std::size_t k = 0; k < nb.param_grads[i].size(); ++k) g.feature_grads[i][k] += nb.param_grads[i][k];
    }
    g.grad_frames.push_back(std::move(nb.grad_input));
  }
  run.frame_caches.clear();
  return g;
}

}  // namespace tinydl
