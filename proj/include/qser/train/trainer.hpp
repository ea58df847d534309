#pragma once

// Mini-batch training and UAR evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qser/data.hpp"
#include "qser/error.hpp"
#include "qser/nn/optim.hpp"
#include "qser/train/model.hpp"

namespace qser {

struct TrainConfig {
  OptimizerConfig optimizer;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    optimizer.validate();
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  }
};

struct EvalReport {
  std::vector<double> per_class_recall;
  double uar = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t trainable_params = 0;
};

/// Recall per class and their unweighted mean. Every class must occur.
inline EvalReport uar_report(const std::vector<std::size_t>& truth,
                             const std::vector<std::size_t>& predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size())
    throw EvaluationError("truth and prediction counts differ");
  EvalReport r;
  r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes || predicted[i] >= n_classes)
      throw EvaluationError("label outside [0, " + std::to_string(n_classes) + ")");
    r.confusion[truth[i]][predicted[i]]++;
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < n_classes; ++k) {
    std::size_t total = 0;
    for (auto c : r.confusion[k]) total += c;
    if (total == 0)
      throw EvaluationError("class " + std::to_string(k) + " is absent from the evaluation set");
    r.per_class_recall.push_back(static_cast<double>(r.confusion[k][k]) / static_cast<double>(total));
    sum += r.per_class_recall.back();
  }
  r.uar = sum / static_cast<double>(n_classes);
  return r;
}

inline EvalReport evaluate(Model& model, const Dataset& data) {
  std::vector<std::size_t> predicted;
  predicted.reserve(data.size());
  for (const auto& x : data.inputs) predicted.push_back(model.predict(x));
  EvalReport r = uar_report(data.labels, predicted, model.n_classes());
  r.trainable_params = model.param_count();
  return r;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_uar;
};

/// Return false to stop after this epoch.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Each epoch visits the training set in the order drawn from
/// Rng(seed, "shuffle", epoch). Per batch, gradients are summed example by
/// example in that order, divided by the batch length, and applied once per
/// layer. Validation UAR is recorded when val is non-empty.
inline std::vector<EpochRecord> train_model(Model& model, const Dataset& train, const Dataset& val,
                                            const TrainConfig& cfg,
                                            const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<EpochRecord> history;
  if (cfg.epochs == 0) return history;
  if (train.empty()) throw DataError("training set is empty");
  for (const auto& x : train.inputs)
    if (x.shape() != model.input_shape())
      throw ModelError("training input " + shape_string(x.shape()) + " does not match model input " +
                       shape_string(model.input_shape()));

  std::vector<OptimizerState> states(model.n_layers());
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(cfg.seed, "shuffle", epoch);
    shuffle.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      model.zero_grads();
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const double loss = model.accumulate_gradients(train.inputs[idx], train.labels[idx]);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                             std::to_string(idx) + " (lr " + std::to_string(cfg.optimizer.learning_rate) +
                             ", optimizer " + optimizer_name(cfg.optimizer.kind) + ")");
        }
        loss_sum += loss;
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t l = 0; l < model.n_layers(); ++l) {
        auto g = model.layer(l).grads();
        if (g.empty()) continue;
        for (auto& v : g) v *= scale;
        auto w = model.layer(l).params();
        optimizer_step(states[l], w, g, cfg.optimizer);
        if (!std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); }))
          throw NumericError("parameters of layer " + std::to_string(l) + " diverged at epoch " +
                             std::to_string(epoch) + " (lr " + std::to_string(cfg.optimizer.learning_rate) +
                             ", optimizer " + optimizer_name(cfg.optimizer.kind) + ")");
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    if (!val.empty()) rec.val_uar = evaluate(model, val).uar;
    history.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return history;
}

}  // namespace qser
