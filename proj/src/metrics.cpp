#include "tinydl/metrics.hpp"

#include <algorithm>

#include "tinydl/errors.hpp"

namespace tinydl {

LossKind default_loss(Task task) {
  switch (task) {
    case Task::binary:
    case Task::multilabel:
    case Task::sequence: return LossKind::binary_cross_entropy;
    case Task::multiclass:
    case Task::per_pixel: return LossKind::categorical_cross_entropy;
  }
  return LossKind::binary_cross_entropy;
}

void check_task_head(const Network& net, Task task, const Shape& target_shape) {
  if (net.size() == 0) throw ConfigError("network has no layers");
  if (net.output_shape() != target_shape) {
    throw ConfigError("network output " + to_string(net.output_shape()) + " does not match target " +
                      to_string(target_shape) + " for task " + to_string(task));
  }
  const LayerSpec head = net.layer(net.size() - 1).spec();
  const bool sigmoid = head.kind == LayerKind::activation && head.activation == Activation::sigmoid;
  const bool softmax = head.kind == LayerKind::softmax;
  switch (task) {
    case Task::binary:
      if (!sigmoid || shape_size(target_shape) != 1) throw ConfigError("binary task needs a single sigmoid output");
      break;
    case Task::multilabel:
      if (!sigmoid) throw ConfigError("multilabel task needs per-output sigmoid activations");
      break;
    case Task::multiclass:
      if (!softmax || target_shape.size() != 1) throw ConfigError("multiclass task needs a softmax head");
      break;
    case Task::per_pixel:
      if (!softmax || target_shape.size() != 3) throw ConfigError("per-pixel task needs a [C,H,W] softmax head");
      break;
    case Task::sequence: throw ConfigError("sequence tasks are evaluated by the recurrent module");
  }
}

namespace {

std::size_t argmax_strided(const Tensor& t, std::size_t offset, std::size_t n, std::size_t stride) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (t[offset + k * stride] > t[offset + best * stride]) best = k;
  return best;
}

void finish_rates(Metrics& m) {
  const std::size_t k = m.confusion.size();
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted = 0, support = 0;
    for (std::size_t r = 0; r < k; ++r) predicted += m.confusion[r][c];
    for (std::size_t p = 0; p < k; ++p) support += m.confusion[c][p];
    m.precision[c] = predicted ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(predicted) : 0.0;
    m.recall[c] = support ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(support) : 0.0;
  }
}

}  // namespace

Metrics score_predictions(const std::vector<Tensor>& predictions, const Dataset& data, Task task) {
  if (predictions.size() != data.size()) throw ConfigError("prediction count does not match dataset");
  if (data.empty()) throw ConfigError("cannot evaluate an empty dataset");
  Metrics m;
  m.task = task;
  m.count = data.size();
  const LossKind lk = default_loss(task);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    require_same_shape(predictions[i], data.examples[i].target, "evaluate");
    loss_sum += loss(lk, predictions[i], data.examples[i].target).value;
  }
  m.loss = loss_sum / static_cast<double>(data.size());

  switch (task) {
    case Task::binary:
    case Task::multiclass:
    case Task::per_pixel: {
      const Shape& ts = data.target_shape();
      const std::size_t classes = task == Task::binary ? 2 : ts[0];
      const std::size_t plane = task == Task::per_pixel ? ts[1] * ts[2] : 1;
      m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
      std::size_t correct = 0, total = 0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor& p = predictions[i];
        const Tensor& t = data.examples[i].target;
        for (std::size_t pos = 0; pos < plane; ++pos) {
          std::size_t truth, guess;
          if (task == Task::binary) {
            truth = t[0] >= 0.5 ? 1 : 0;
            guess = p[0] >= 0.5 ? 1 : 0;
          } else {
            truth = argmax_strided(t, pos, classes, plane);
            guess = argmax_strided(p, pos, classes, plane);
          }
          ++m.confusion[truth][guess];
          correct += truth == guess;
          ++total;
        }
      }
      m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
      std::size_t largest = 0;
      for (const auto& row : m.confusion) {
        std::size_t support = 0;
        for (auto v : row) support += v;
        largest = std::max(largest, support);
      }
      m.majority_baseline = static_cast<double>(largest) / static_cast<double>(total);
      m.coin_baseline = 1.0 / static_cast<double>(classes);
      m.per_class_accuracy = {};
      break;
    }
    case Task::multilabel: {
      const std::size_t labels = data.target_shape()[0];
      m.confusion.assign(2, std::vector<std::size_t>(2, 0));
      std::vector<std::size_t> correct(labels, 0), positives(labels, 0);
      std::vector<std::vector<std::size_t>> tp(labels, std::vector<std::size_t>(3, 0));  // tp, predicted, support
      for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < labels; ++k) {
          const std::size_t truth = data.examples[i].target[k] >= 0.5;
          const std::size_t guess = predictions[i][k] >= 0.5;
          ++m.confusion[truth][guess];
          correct[k] += truth == guess;
          positives[k] += truth;
          tp[k][0] += truth && guess;
          tp[k][1] += guess;
          tp[k][2] += truth;
        }
      }
      const double n = static_cast<double>(data.size());
      double acc = 0.0, majority = 0.0;
      m.precision.assign(labels, 0.0);
      m.recall.assign(labels, 0.0);
      for (std::size_t k = 0; k < labels; ++k) {
        const double a = static_cast<double>(correct[k]) / n;
        m.per_class_accuracy.push_back(a);
        acc += a;
        const double pos = static_cast<double>(positives[k]) / n;
        majority += std::max(pos, 1.0 - pos);
        m.precision[k] = tp[k][1] ? static_cast<double>(tp[k][0]) / static_cast<double>(tp[k][1]) : 0.0;
        m.recall[k] = tp[k][2] ? static_cast<double>(tp[k][0]) / static_cast<double>(tp[k][2]) : 0.0;
      }
      m.accuracy = acc / static_cast<double>(labels);
      m.majority_baseline = majority / static_cast<double>(labels);
      m.coin_baseline = 0.5;
      m.baseline = std::max(m.coin_baseline, m.majority_baseline);
      return m;
    }
    case Task::sequence: throw ConfigError("sequence tasks are evaluated by the recurrent module");
  }
  finish_rates(m);
  m.baseline = std::max(m.coin_baseline, m.majority_baseline);
  return m;
}

Metrics evaluate(const Network& net, const Dataset& test, Task task) {
  if (test.empty()) throw ConfigError("cannot evaluate an empty dataset");
  check_task_head(net, task, test.target_shape());
  std::vector<Tensor> predictions;
  predictions.reserve(test.size());
  for (const auto& ex : test.examples) predictions.push_back(predict(net, ex.input));
  return score_predictions(predictions, test, task);
}

}  // namespace tinydl
