#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gres2net/data.hpp"
#include "gres2net/metrics.hpp"
#include "gres2net/model.hpp"

namespace gres2net {

struct TrainConfig {
  double lr0 = 0.001;
  std::size_t epochs = 500;
  std::size_t decay_every = 100;
  double decay_factor = 0.1;
  std::size_t batch_size = 32;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  std::size_t eval_repeats = 5;

  /// Paper protocol defaults; batch size 32 for classification, 64 for forecasting.
  static TrainConfig defaults_for(Task task);
  /// Throws ConfigError.
  void validate() const;
};

/// lr0 * decay_factor^floor(epoch / decay_every).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

/// Mean over the batch of -log softmax(logits)[label]. logits: (B, C, 1).
Var cross_entropy_loss(Var logits, std::span<const int> labels);
/// Mean of squared differences. `target` must match pred's shape.
Var mse_loss(Var pred, const Tensor3& target);

/// Standard bias-corrected Adam.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor3> m;
  std::vector<Tensor3> v;

  bool operator==(const AdamState&) const = default;
};

/// One Adam update of `params` in place. Moments are created on the first
/// step. Non-finite gradients throw NonFiniteError before anything changes.
void adam_step(AdamState& state, std::span<Parameter* const> params, std::span<const Tensor3> grads, double lr);

/// Validation metric: accuracy (%) for classification, RMSE in original
/// target units for forecasting.
bool metric_improves(Task task, double candidate, double best);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_metric = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// Accuracy for classification, or all four forecasting criteria.
struct MetricRecord {
  double loss = 0.0;
  double accuracy = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape;  ///< absent when a target is zero
  double r2 = 0.0;

  double headline(Task task) const { return task == Task::classification ? accuracy : rmse; }
  bool operator==(const MetricRecord&) const = default;
};

/// (B, C, Tmax) batch of the selected samples, right-padded with zeros.
Tensor3 make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices);

struct Predictions {
  std::vector<int> labels;           ///< classification argmax
  std::vector<Tensor3> outputs;      ///< raw (1, outputs, 1) per sample
  EvalSeries series;                 ///< forecasting, original units
};

/// Eval-mode forward over `samples` in order.
Predictions predict(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                    std::size_t batch_size);
MetricRecord evaluate(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                      std::size_t batch_size);

struct RepeatedEval {
  std::vector<MetricRecord> records;
  MetricRecord mean;
};

/// Runs evaluate() `repeats` times (dropout off) and averages each metric.
RepeatedEval evaluate_repeated(Model& model, const std::vector<Sample>& samples, const DatasetSplit& split,
                               std::size_t batch_size, std::size_t repeats);
MetricRecord average(std::span<const MetricRecord> records);

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  std::size_t next_epoch = 0;
  AdamState adam;
  std::string rng_state;
  std::optional<double> best_metric;
  std::size_t best_epoch = 0;
  std::vector<Tensor3> best_params;

  bool operator==(const TrainState&) const = default;
};

struct TrainResult {
  std::vector<Tensor3> best_params;   ///< early-stopping checkpoint
  std::optional<double> best_metric;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  TrainState state;                   ///< state after the last epoch, model holds its parameters
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains for the configured epochs (or up to them, when resuming), shuffling
/// minibatches with the seeded RNG and keeping the parameters with the best
/// validation metric. The model is left holding the last-epoch parameters.
TrainResult train_model(Model& model, const DatasetSplit& data, const TrainConfig& config,
                        const TrainState* resume = nullptr, const EpochCallback& on_epoch = {});

}  // namespace gres2net
