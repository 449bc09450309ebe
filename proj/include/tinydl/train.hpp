#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tinydl/architecture.hpp"
#include "tinydl/data.hpp"
#include "tinydl/losses.hpp"
#include "tinydl/metrics.hpp"
#include "tinydl/optim.hpp"

namespace tinydl {

struct TrainConfig {
  std::size_t epochs = 50;
  /// Consecutive non-improving validation epochs before stopping; 0 disables.
  std::size_t patience = 5;
  bool restore_best = true;
  LossKind loss = LossKind::binary_cross_entropy;
  OptimizerKind optimizer = OptimizerKind::adaptive;
  double learning_rate = 0.05;
  double reg_strength = 0.0;
  std::size_t batch_size = 32;
  bool shuffle = true;
  std::uint64_t seed = 0;
  std::optional<AugmentConfig> augment;

  void validate() const;
};

enum class StopReason { max_epochs, early_stop };

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;  // validation accuracy
  std::uint64_t iteration = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  StopReason stop = StopReason::max_epochs;
  std::size_t best_epoch = 0;

  /// epoch,train_loss,val_loss,val_metric with round-trip precision.
  void write_csv(std::ostream& out) const;
};

/// Patience-based stopping rule on a stream of validation losses.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  /// Records one epoch's loss; true when training should stop now.
  bool update(double val_loss);
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }
  bool improved_last() const { return stale_ == 0; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = 0.0;
};

/// Mini-batch training: forward, loss (+ L2 penalty), backward, one
/// optimizer step per batch, then validation. Per-example gradients are
/// summed in ascending example order. Throws TrainingError on a non-finite loss;
/// `partial` (when given) receives the history up to that point.
TrainHistory train(Network& net, const Dataset& train_set, const Dataset& val_set,
                   const TrainConfig& config, TrainHistory* partial = nullptr);

/// Mean loss over a dataset in inference mode.
double mean_loss(const Network& net, const Dataset& data, LossKind kind);

// --- ablation ------------------------------------------------------------------

struct AblationBase {
  Architecture architecture;
  TrainConfig train;
  Dataset train_set;
  Dataset val_set;
  Dataset test_set;
  Task task = Task::binary;
};

struct AblationRow {
  std::string variant;
  Metrics metrics;
  TrainHistory history;
  std::uint64_t checksum = 0;
};

/// Toggles: "dropout" (remove dropout layers), "l2" (strength 0),
/// "augmentation" (off), "layer:<i>" (drop layer i). Every variant trains
/// from the same seed on the same splits. The first row is the base.
std::vector<AblationRow> ablate(const AblationBase& base, const std::vector<std::string>& toggles);

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

}  // namespace tinydl
