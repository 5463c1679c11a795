#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gres2net/tensor.hpp"

namespace gres2net {

enum class Task { classification, forecasting };

const char* to_string(Task task);
Task parse_task(const std::string& text);

enum class MissingPolicy { error, forward_fill };

struct WindowSpec {
  std::size_t history = 48;
  std::size_t horizon = 1;
  std::size_t stride = 1;

  void validate() const;
};

/// Column roles of a CSV file plus the sample construction rules.
///
/// Schema files are `key = value` lines (`#` starts a comment):
///
///     task = classification          # or forecasting
///     features = Temperature,Humidity,Light,CO2,HumidityRatio
///     label = Occupancy              # classification
///     target = load                  # forecasting
///     timestamp = date               # optional
///     sequence = seq                 # optional; groups rows into one sample each
///     window.length = 32             # classification without a sequence column
///     window.stride = 32
///     window.history = 48            # forecasting
///     window.horizon = 1
///     window.stride = 1
///     missing = error                # or ffill
struct Schema {
  Task task = Task::classification;
  std::vector<std::string> features;
  std::string label;
  std::string target;
  std::string timestamp;
  std::string sequence;
  MissingPolicy missing = MissingPolicy::error;
  WindowSpec forecast_window;
  std::size_t class_window_length = 32;
  std::size_t class_window_stride = 32;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  std::string to_text() const;
};

Schema parse_schema(const std::string& text, const std::string& source = "<schema>");
Schema load_schema(const std::string& path);

/// Typed in-memory view of one CSV file restricted to the schema's columns.
struct RawTable {
  std::vector<std::string> names;              ///< feature column names, schema order
  std::vector<std::vector<double>> columns;    ///< one value sequence per feature
  std::vector<double> target;                  ///< forecasting target column
  std::vector<std::string> labels;             ///< classification label column
  std::vector<std::string> sequence_ids;       ///< optional grouping column
  std::vector<std::string> timestamps;         ///< optional

  std::size_t rows() const { return columns.empty() ? target.size() : columns.front().size(); }
  bool operator==(const RawTable&) const = default;
};

/// Parses UTF-8 comma-separated text with a header row. Quoted fields are
/// supported. When every data row has exactly one more field than the header,
/// the extra leading field is treated as a row index and dropped.
RawTable parse_csv(std::istream& in, const Schema& schema, const std::string& source = "<csv>");
RawTable load_csv(const std::string& path, const Schema& schema);

void write_csv(std::ostream& out, const RawTable& table, const Schema& schema);

/// Splits a table in time order: the last `fraction` of rows go to validation.
std::pair<RawTable, RawTable> split_chronological(const RawTable& table, double validation_fraction);

struct Sample {
  Tensor3 input;                ///< (1, channels, time)
  int label = -1;               ///< classification
  std::vector<double> target;   ///< forecasting, length = horizon

  bool operator==(const Sample&) const = default;
};

/// Per-channel affine normalisation: (x - mean) / scale.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> scale;   ///< population std, or 1 for a constant channel

  bool empty() const { return mean.empty(); }
  bool operator==(const ChannelStats&) const = default;
};

struct DatasetSplit {
  Task task = Task::classification;
  std::vector<std::string> channel_names;
  std::vector<std::string> classes;   ///< classification: label text per class index
  std::size_t horizon = 1;            ///< forecasting outputs per sample
  std::vector<Sample> train;
  std::vector<Sample> validation;
  ChannelStats input_stats;           ///< set by normalize()
  ChannelStats target_stats;          ///< forecasting only, set by normalize()

  std::size_t input_channels() const { return channel_names.size(); }
  std::size_t num_outputs() const { return task == Task::classification ? classes.size() : horizon; }
  bool normalized() const { return !input_stats.empty(); }
  bool operator==(const DatasetSplit&) const = default;
};

/// Forecasting samples: history-length windows of all feature channels paired
/// with the next `horizon` target values, advancing by `stride`.
/// count = floor((L - history - horizon) / stride) + 1.
std::vector<Sample> make_windows(const RawTable& table, const WindowSpec& spec);

/// Classification samples, one per sequence id or per fixed window (label of
/// the window's last row). `classes` maps label text to indices.
std::vector<Sample> make_sequences(const RawTable& table, const Schema& schema,
                                   const std::vector<std::string>& classes);

/// Sorted distinct labels; numeric labels sort by value.
std::vector<std::string> collect_classes(const RawTable& table);

/// Builds an unnormalised split from predefined train and validation tables.
DatasetSplit build_split(const RawTable& train, const RawTable& validation, const Schema& schema);

ChannelStats compute_input_stats(const std::vector<Sample>& samples, std::size_t channels);
ChannelStats compute_target_stats(const std::vector<Sample>& samples);
void apply_input_stats(std::vector<Sample>& samples, const ChannelStats& stats);
void apply_target_stats(std::vector<Sample>& samples, const ChannelStats& stats);

/// Per-channel z-score with train-partition statistics applied to both
/// partitions; forecasting targets are standardised the same way.
DatasetSplit normalize(DatasetSplit split);

/// Content hash of a sample, used to check partitions are disjoint.
std::uint64_t sample_hash(const Sample& s);
bool partitions_disjoint(const DatasetSplit& split);

struct SynthOptions {
  std::size_t size = 0;          ///< samples per partition (classification, default 128) or
                                 ///< series length (forecasting, default 640); 0 selects the default
  double noise = -1.0;           ///< < 0 selects the task default
  std::size_t time_length = 32;  ///< classification sequence length
  WindowSpec window;             ///< forecasting windowing
};

/// Synthetic data as CSV-ready tables plus the generator's ground truth.
struct SyntheticData {
  Schema schema;
  RawTable train;
  RawTable validation;
  double noise = 0.0;
  /// Forecasting: the noiseless target over the whole series (train then validation).
  std::vector<double> clean_target;
};

/// Classification: 3 channels; the label is the sign of the correlation
/// between channels 1 and 2 (channel 2 = +-channel 1 + noise), channel 3 is a
/// distractor. Forecasting: a noisy two-period sine load with phase covariates.
SyntheticData make_synthetic_tables(Task task, std::uint64_t seed, const SynthOptions& options = {});
DatasetSplit make_synthetic(Task task, std::uint64_t seed, const SynthOptions& options = {});

}  // namespace gres2net
