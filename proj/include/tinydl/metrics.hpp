#pragma once

#include <string>
#include <vector>

#include "tinydl/data.hpp"
#include "tinydl/network.hpp"

namespace tinydl {

struct Metrics {
  Task task = Task::binary;
  /// Fraction of correct decisions: examples (binary, multiclass), example x
  /// label pairs (multilabel) or pixels (per_pixel).
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // multilabel: one per label
  std::vector<double> precision;
  std::vector<double> recall;
  /// confusion[true][predicted]. Multilabel pools every label into 2x2.
  std::vector<std::vector<std::size_t>> confusion;
  double coin_baseline = 0.5;      // uniform random guess
  double majority_baseline = 0.0;  // always predict the most frequent class
  double baseline = 0.0;           // max of the two
  double loss = 0.0;               // mean loss under the task's default loss
  std::size_t count = 0;
};

/// Loss matching the head of each task: BCE for binary / multilabel,
/// categorical cross-entropy for multiclass / per_pixel.
LossKind default_loss(Task task);

/// Checks that the network's head fits the task (sigmoid for binary and
/// multilabel, softmax for multiclass and per_pixel) and that output and
/// target shapes agree. Throws ConfigError otherwise.
void check_task_head(const Network& net, Task task, const Shape& target_shape);

Metrics evaluate(const Network& net, const Dataset& test, Task task);

/// Metrics computed from explicit predictions (same layout as targets).
Metrics score_predictions(const std::vector<Tensor>& predictions, const Dataset& data, Task task);

}  // namespace tinydl
