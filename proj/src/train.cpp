#include "tinydl/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "tinydl/errors.hpp"

namespace tinydl {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be a non-negative number");
  if (!(reg_strength >= 0.0) || !std::isfinite(reg_strength)) throw ConfigError("regularization strength must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (augment) {
    if (augment->max_rotation_deg < 0.0 || !(augment->probability >= 0.0 && augment->probability <= 1.0)) {
      throw ConfigError("augmentation bounds must be non-negative and probability in [0, 1]");
    }
  }
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_loss,val_metric\n";
  out << std::setprecision(17);
  for (const auto& r : epochs) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_metric << '\n';
  }
}

bool EarlyStopper::update(double val_loss) {
  ++epoch_;
  if (epoch_ == 1 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return patience_ > 0 && stale_ >= patience_;
}

double mean_loss(const Network& net, const Dataset& data, LossKind kind) {
  double total = 0.0;
  for (const auto& ex : data.examples) total += loss(kind, predict(net, ex.input), ex.target).value;
  return total / static_cast<double>(data.size());
}

namespace {

double quick_accuracy(const Network& net, const Dataset& data) {
  if (data.task == Task::sequence) return 0.0;
  try {
    std::vector<Tensor> preds;
    preds.reserve(data.size());
    for (const auto& ex : data.examples) preds.push_back(predict(net, ex.input));
    return score_predictions(preds, data, data.task).accuracy;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<Tensor> snapshot(const Network& net) {
  std::vector<Tensor> out;
  for (const Tensor* p : net.parameters()) out.push_back(*p);
  return out;
}

void restore(Network& net, const std::vector<Tensor>& saved) {
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

}  // namespace

TrainHistory train(Network& net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config, TrainHistory* partial) {
  config.validate();
  if (train_set.empty() || val_set.empty()) throw ConfigError("training and validation sets must be non-empty");
  if (train_set.input_shape() != net.input_shape()) {
    throw ConfigError("training inputs " + to_string(train_set.input_shape()) + " do not match network input " +
                      to_string(net.input_shape()));
  }
  if (train_set.target_shape() != net.output_shape()) {
    throw ConfigError("training targets " + to_string(train_set.target_shape()) +
                      " do not match network output " + to_string(net.output_shape()));
  }

  OptimizerState opt;
  opt.kind = config.optimizer;
  opt.learning_rate = config.learning_rate;
  opt.reg_strength = config.reg_strength;

  BatchPlan plan{std::min(config.batch_size, train_set.size()), config.shuffle,
                 Rng::derive(config.seed, "batches")};
  Rng dropout_rng(Rng::derive(config.seed, "dropout"));
  Rng augment_rng(Rng::derive(config.seed, "augment"));

  TrainHistory history;
  EarlyStopper stopper(config.patience);
  std::vector<Tensor> best = snapshot(net);

  // Frozen layers are excluded from the optimizer entirely.
  std::vector<Tensor*> params = net.parameters(true);
  std::vector<bool> is_weight;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.frozen(i)) continue;
    for (std::size_t k = 0; k < net.layer(i).params().size(); ++k) is_weight.push_back(net.layer(i).is_weight(k));
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(train_set.size(), plan, epoch);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      // Gradients are reduced in ascending example order.
      std::vector<std::size_t> batch = batches[b];
      std::sort(batch.begin(), batch.end());
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (const Tensor* p : params) grads.emplace_back(p->shape());
      double batch_loss = 0.0;
      for (auto idx : batch) {
        const Example& ex = train_set.examples[idx];
        const Tensor input = config.augment ? augment(ex.input, *config.augment, augment_rng) : ex.input;
        NetForward f = forward(net, input, Mode::training, dropout_rng);
        LossValue l = loss(config.loss, f.output, ex.target);
        batch_loss += l.value;
        auto g = flatten_grads(net, backward(net, f.caches, l.grad), true);
        for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += g[k];
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      batch_loss *= inv;
      for (auto& g : grads) g *= inv;
      if (config.reg_strength > 0.0) {
        std::vector<const Tensor*> weights;
        std::vector<std::size_t> slots;
        for (std::size_t k = 0; k < params.size(); ++k) {
          if (is_weight[k]) {
            weights.push_back(params[k]);
            slots.push_back(k);
          }
        }
        const L2Penalty pen = l2_penalty(weights, config.reg_strength);
        batch_loss += pen.value;
        for (std::size_t k = 0; k < slots.size(); ++k) grads[slots[k]] += pen.grads[k];
      }
      if (!std::isfinite(batch_loss)) {
        if (partial) *partial = history;
        throw TrainingError("training diverged: non-finite loss", static_cast<int>(epoch + 1),
                            static_cast<int>(b));
      }
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      optimizer_step(opt, params, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    rec.val_loss = mean_loss(net, val_set, config.loss);
    rec.val_metric = quick_accuracy(net, val_set);
    rec.iteration = opt.iteration;
    if (!std::isfinite(rec.val_loss)) {
      if (partial) *partial = history;
      throw TrainingError("validation loss is not finite", static_cast<int>(epoch + 1), -1);
    }
    history.epochs.push_back(rec);
    const bool stop = stopper.update(rec.val_loss);
    if (stopper.improved_last()) best = snapshot(net);
    if (stop) {
      history.stop = StopReason::early_stop;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  if (config.restore_best && config.patience > 0) restore(net, best);
  return history;
}

// --- ablation ------------------------------------------------------------------

namespace {

struct Variant {
  std::string name;
  Architecture arch;
  TrainConfig train;
};

Variant apply_toggle(const Variant& base, const std::string& toggle) {
  Variant v = base;
  v.name = "-" + toggle;
  if (toggle == "dropout") {
    std::erase_if(v.arch.layers, [](const LayerSpec& s) { return s.kind == LayerKind::dropout; });
  } else if (toggle == "l2") {
    v.train.reg_strength = 0.0;
  } else if (toggle == "augmentation") {
    v.train.augment.reset();
  } else if (toggle.rfind("layer:", 0) == 0) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(toggle.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("ablation toggle '" + toggle + "': bad layer index");
    }
    if (idx >= v.arch.layers.size()) throw ConfigError("ablation toggle '" + toggle + "': layer index out of range");
    v.arch.layers.erase(v.arch.layers.begin() + static_cast<std::ptrdiff_t>(idx));
  } else {
    throw ConfigError("unknown ablation toggle '" + toggle + "'");
  }
  try {
    infer_shapes(v.arch);
  } catch (const DimensionError& e) {
    throw ConfigError("ablation toggle '" + toggle + "' breaks the architecture: " + e.what());
  }
  return v;
}

}  // namespace

std::vector<AblationRow> ablate(const AblationBase& base, const std::vector<std::string>& toggles) {
  Variant root{"base", base.architecture, base.train};
  std::vector<Variant> variants{root};
  // Validate every toggle before any training.
  for (const auto& t : toggles) variants.push_back(apply_toggle(root, t));
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    Network net = build_network(v.arch, v.train.seed);
    AblationRow row;
    row.variant = v.name;
    row.history = train(net, base.train_set, base.val_set, v.train);
    row.metrics = evaluate(net, base.test_set, base.task);
    row.checksum = net.checksum();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "variant,test_accuracy,baseline,final_train_loss,final_val_loss,epochs\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    const double tl = r.history.epochs.empty() ? 0.0 : r.history.epochs.back().train_loss;
    const double vl = r.history.epochs.empty() ? 0.0 : r.history.epochs.back().val_loss;
    out << r.variant << ',' << r.metrics.accuracy << ',' << r.metrics.baseline << ',' << tl << ',' << vl << ','
        << r.history.epochs.size() << '\n';
  }
}

}  // namespace tinydl
