#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scatterbox/atloss.hpp"
#include "scatterbox/error.hpp"
#include "scatterbox/model.hpp"
#include "scatterbox/rng.hpp"

namespace sbx {

// Flat, channel-major samples of one shape, with class indices.
struct LabeledSet {
  std::vector<std::vector<float>> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

struct TrainConfig {
  std::size_t batch_size = 128;
  AdamConfig adam;
  std::size_t max_weight_updates = 11000;
  ATConfig at;  // empty bank = plain cross-entropy
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  double stop_at_val_accuracy = 2.0;  // > 1 never stops early
  unsigned threads = 1;
};

struct MetricRecord {
  std::size_t update_index = 0;
  double train_loss = 0.0;  // mean batch loss since the previous record
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<MetricRecord> history;
  ConvClassifier<float> best_model;
  std::size_t best_update = 0;
  double best_val_accuracy = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = 0.0;
  Matrix<std::size_t> confusion;  // rows: true class, cols: predicted class (test set)
  std::size_t updates_run = 0;

  /// First recorded update whose validation accuracy reaches `threshold`.
  std::optional<std::size_t> first_update_reaching(double threshold) const {
    for (const auto& r : history)
      if (r.val_accuracy >= threshold) return r.update_index;
    return std::nullopt;
  }
};

/// Per-channel mean and standard deviation over a set of samples.
inline std::pair<std::vector<double>, std::vector<double>> channel_statistics(const LabeledSet& set,
                                                                              std::size_t channels) {
  std::vector<double> mean(channels, 0.0), sq(channels, 0.0);
  if (set.empty()) throw InputError("cannot compute statistics of an empty set");
  const std::size_t plane = set.inputs.front().size() / channels;
  for (const auto& x : set.inputs) {
    if (x.size() != plane * channels) throw InputError("samples differ in size");
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = x[c * plane + i];
        mean[c] += v;
        sq[c] += v * v;
      }
  }
  const double n = static_cast<double>(set.size() * plane);
  std::vector<double> scale(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    mean[c] /= n;
    const double var = std::max(sq[c] / n - mean[c] * mean[c], 0.0);
    scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return {mean, scale};
}

inline std::vector<std::size_t> predict(const ConvClassifier<float>& model, const LabeledSet& set) {
  std::vector<std::size_t> out(set.size());
  Workspace<float> ws;
  for (std::size_t i = 0; i < set.size(); ++i) {
    forward_sample(model, std::span<const float>(set.inputs[i]), ws);
    out[i] = static_cast<std::size_t>(std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
  }
  return out;
}

inline double accuracy(const ConvClassifier<float>& model, const LabeledSet& set) {
  if (set.empty()) return 0.0;
  const auto pred = predict(model, set);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i];
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

inline Matrix<std::size_t> confusion_matrix(const ConvClassifier<float>& model, const LabeledSet& set) {
  Matrix<std::size_t> out(model.spec.classes, model.spec.classes, 0);
  const auto pred = predict(model, set);
  for (std::size_t i = 0; i < pred.size(); ++i) ++out(set.labels[i], pred[i]);
  return out;
}

/// Mini-batch Adam on `train`. Batches are consecutive slices of a
/// per-epoch shuffle (the last slice of an epoch may be short). Every
/// eval_every updates, and after the final update, validation accuracy is
/// recorded; the parameters with the highest validation accuracy (earliest
/// on ties, the initial model if nothing was recorded) are kept and scored
/// on `test`.
inline TrainResult train(ConvClassifier<float> model, const LabeledSet& train_set, const LabeledSet& val_set,
                         const LabeledSet& test_set, const TrainConfig& cfg,
                         const std::function<void(const MetricRecord&)>& on_record = {}) {
  if (train_set.empty() || val_set.empty() || test_set.empty())
    throw InputError("train, validation and test sets must all be non-empty");
  if (cfg.batch_size == 0 || cfg.eval_every == 0) throw ParameterError("batch size and eval interval must be positive");
  if (!(cfg.adam.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
  validate(cfg.at, model.spec.classes);
  for (const auto* set : {&train_set, &val_set, &test_set}) {
    if (set->labels.size() != set->inputs.size()) throw InputError("labels and inputs differ in count");
    for (std::size_t label : set->labels)
      if (label >= model.spec.classes) throw InputError("label outside the model's classes");
  }

  TrainResult result;
  result.best_model = model;
  SplitMix64 rng(cfg.seed);
  SplitMix64 order_rng = rng.fork(0x5348554646ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  AdamState adam;
  std::vector<float> grad;
  std::vector<std::span<const float>> batch;
  std::vector<std::size_t> labels;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  bool recorded_any = false;

  auto record = [&](std::size_t update) {
    MetricRecord r{update, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0, accuracy(model, val_set)};
    loss_sum = 0.0;
    loss_count = 0;
    result.history.push_back(r);
    if (!recorded_any || r.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = r.val_accuracy;
      result.best_update = update;
      result.best_model = model;
    }
    recorded_any = true;
    if (on_record) on_record(r);
    return r.val_accuracy;
  };

  for (std::size_t update = 1; update <= cfg.max_weight_updates; ++update) {
    batch.clear();
    labels.clear();
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        if (!batch.empty()) break;  // short final slice of the epoch
        order_rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      batch.emplace_back(train_set.inputs[idx]);
      labels.push_back(train_set.labels[idx]);
    }
    const double loss = loss_and_gradient(model, std::span<const std::span<const float>>(batch),
                                          std::span<const std::size_t>(labels), cfg.at, grad, cfg.threads);
    if (!std::isfinite(loss))
      throw TrainingDiverged("loss became " + std::to_string(loss) + " at weight update " + std::to_string(update) +
                             "; lower the learning rate or check the inputs for extreme values");
    adam_step(model, std::span<const float>(grad), adam, cfg.adam, update);
    loss_sum += loss;
    ++loss_count;
    result.updates_run = update;
    const bool last = update == cfg.max_weight_updates;
    if (update % cfg.eval_every == 0 || last) {
      if (record(update) >= cfg.stop_at_val_accuracy) break;
    }
  }

  result.test_accuracy = accuracy(result.best_model, test_set);
  result.confusion = confusion_matrix(result.best_model, test_set);
  if (!recorded_any) result.best_val_accuracy = accuracy(result.best_model, val_set);
  return result;
}

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricRecord>& history) {
  out << "update,train_loss,val_acc\n";
  out.precision(9);
  for (const auto& r : history) out << r.update_index << ',' << r.train_loss << ',' << r.val_accuracy << '\n';
}

}  // namespace sbx
