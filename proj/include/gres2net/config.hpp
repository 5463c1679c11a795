#pragma once

#include <cstdint>
#include <string>

#include "gres2net/data.hpp"
#include "gres2net/model.hpp"
#include "gres2net/train.hpp"

namespace gres2net {

/// How the final validation figure is produced. `eval`: the best checkpoint
/// is evaluated `repeats` times. `retrain`: `repeats` full runs with seeds
/// seed, seed+1, ... and the mean of their best-checkpoint metrics.
enum class RepeatMode { eval, retrain };

/// A run described by a `key = value` file. Every key is optional; defaults
/// follow the published protocol (Adam, lr 0.001, 500 epochs, x0.1 every 100,
/// batch 32 / 64, dropout 0.5, 5 validation repeats, 8-layer bidirectional LSTM).
///
///     task = classification | forecasting
///     model = gres2net | res2net | lstm
///     out = runs/example                 # relative to the config file
///     data.source = files | synthetic
///     data.schema = schema.txt           # files
///     data.train = train.csv
///     data.validation = validation.csv   # omit to split data.train in time order
///     data.validation_fraction = 0.2
///     synthetic.seed / synthetic.size / synthetic.noise / synthetic.time_length
///     train.lr0 / train.epochs / train.decay_every / train.decay_factor
///     train.batch_size / train.dropout / train.seed / train.repeats / train.repeat_mode
///     model.blocks / model.scales / model.width / model.kernel_size
///     model.gate_channels / model.activation (relu | none)
///     lstm.hidden / lstm.layers / lstm.bidirectional
///     head.hidden
struct RunConfig {
  Task task = Task::classification;
  ModelKind model = ModelKind::gres2net;
  std::string out = "run";

  bool synthetic = false;
  std::string schema_path;
  std::string train_path;
  std::string validation_path;
  double validation_fraction = 0.2;
  std::uint64_t synthetic_seed = 0;
  SynthOptions synth;

  TrainConfig train;
  RepeatMode repeat_mode = RepeatMode::eval;

  std::size_t blocks = 2;
  std::size_t scales = 4;
  std::size_t width = 16;
  std::size_t kernel_size = 3;
  std::size_t gate_channels = 0;
  Activation activation = Activation::relu;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 8;
  bool lstm_bidirectional = true;
  std::size_t head_hidden = 64;

  /// Throws ConfigError naming the offending key; checks referenced files exist.
  void validate() const;
  std::string to_text() const;
};

/// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::string& source, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

/// Train/validation split for the run, normalised with train statistics
/// unless `normalise` is false.
DatasetSplit load_run_data(const RunConfig& config, bool normalise = true);

ModelSpec make_model_spec(const RunConfig& config, const DatasetSplit& data);

}  // namespace gres2net
