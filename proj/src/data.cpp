#include "gres2net/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "gres2net/error.hpp"
#include "gres2net/keyvalue.hpp"
#include "gres2net/metrics.hpp"
#include "gres2net/rng.hpp"

namespace gres2net {

const char* to_string(Task task) { return task == Task::classification ? "classification" : "forecasting"; }

Task parse_task(const std::string& text) {
  if (text == "classification") return Task::classification;
  if (text == "forecasting") return Task::forecasting;
  throw ConfigError(fmt::format("unknown task '{}' (expected classification or forecasting)", text));
}

void WindowSpec::validate() const {
  if (history == 0 || horizon == 0 || stride == 0) {
    throw ConfigError(
        fmt::format("window history/horizon/stride must all be >= 1, got {}/{}/{}", history, horizon, stride));
  }
}

// ---- schema ---------------------------------------------------------------

void Schema::validate() const {
  if (features.empty()) throw ConfigError("schema: key 'features' must list at least one column");
  if (task == Task::classification) {
    if (label.empty()) throw ConfigError("schema: key 'label' is required for classification");
    if (sequence.empty() && (class_window_length == 0 || class_window_stride == 0)) {
      throw ConfigError("schema: keys 'window.length' and 'window.stride' must be >= 1");
    }
  } else {
    if (target.empty()) throw ConfigError("schema: key 'target' is required for forecasting");
    forecast_window.validate();
  }
}

std::string Schema::to_text() const {
  KeyValues kv;
  kv.set("task", to_string(task));
  kv.set("features", join(features));
  if (!label.empty()) kv.set("label", label);
  if (!target.empty()) kv.set("target", target);
  if (!timestamp.empty()) kv.set("timestamp", timestamp);
  if (!sequence.empty()) kv.set("sequence", sequence);
  kv.set("missing", missing == MissingPolicy::error ? "error" : "ffill");
  if (task == Task::forecasting) {
    kv.set("window.history", std::to_string(forecast_window.history));
    kv.set("window.horizon", std::to_string(forecast_window.horizon));
    kv.set("window.stride", std::to_string(forecast_window.stride));
  } else if (sequence.empty()) {
    kv.set("window.length", std::to_string(class_window_length));
    kv.set("window.stride", std::to_string(class_window_stride));
  }
  return kv.to_text();
}

Schema parse_schema(const std::string& text, const std::string& source) {
  const KeyValues kv = KeyValues::parse(text, source);
  kv.require_known({"task", "features", "label", "target", "timestamp", "sequence", "missing", "window.history",
                    "window.horizon", "window.stride", "window.length"});
  Schema s;
  s.task = parse_task(kv.get_string("task"));
  s.features = kv.get_list("features");
  s.label = kv.get_string("label", "");
  s.target = kv.get_string("target", "");
  s.timestamp = kv.get_string("timestamp", "");
  s.sequence = kv.get_string("sequence", "");
  const std::string missing = kv.get_string("missing", "error");
  if (missing == "error") {
    s.missing = MissingPolicy::error;
  } else if (missing == "ffill") {
    s.missing = MissingPolicy::forward_fill;
  } else {
    throw ConfigError(fmt::format("{}: key 'missing': expected error or ffill, got '{}'", source, missing));
  }
  if (s.task == Task::forecasting) {
    s.forecast_window.history = kv.get_size("window.history", 48);
    s.forecast_window.horizon = kv.get_size("window.horizon", 1);
    s.forecast_window.stride = kv.get_size("window.stride", 1);
  } else {
    s.class_window_length = kv.get_size("window.length", 32);
    s.class_window_stride = kv.get_size("window.stride", s.class_window_length);
  }
  s.validate();
  return s;
}

Schema load_schema(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open schema '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str(), path);
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?" || cell == "null";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

RawTable parse_csv(std::istream& in, const Schema& schema, const std::string& source) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file, expected a header row", source));
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const std::vector<std::string> header = split_csv_line(trim(line));
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(header[i], i);

  auto column = [&](const std::string& name, const char* role) -> std::size_t {
    auto it = index.find(name);
    if (it == index.end()) throw DataError(fmt::format("{}: {} column '{}' not found in header", source, role, name));
    return it->second;
  };

  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column(f, "feature"));
  const bool forecasting = schema.task == Task::forecasting;
  const std::size_t target_col = forecasting ? column(schema.target, "target") : 0;
  const std::size_t label_col = forecasting ? 0 : column(schema.label, "label");
  constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
  const std::size_t seq_col = schema.sequence.empty() ? kAbsent : column(schema.sequence, "sequence");
  const std::size_t ts_col = schema.timestamp.empty() ? kAbsent : column(schema.timestamp, "timestamp");

  RawTable table;
  table.names = schema.features;
  table.columns.assign(feature_cols.size(), {});

  std::optional<std::size_t> offset;
  std::size_t row = 1;  // 1-based file line of the header
  auto numeric = [&](const std::vector<std::string>& fields, std::size_t col, const std::string& name,
                     const std::vector<double>& previous) -> double {
    const std::string& cell = fields[col + *offset];
    if (auto v = parse_number(cell)) return *v;
    if (!is_missing(cell)) {
      throw DataError(fmt::format("{}: line {}, column '{}': cannot parse '{}' as a number", source, row, name, cell));
    }
    if (schema.missing == MissingPolicy::forward_fill && !previous.empty()) return previous.back();
    throw DataError(fmt::format("{}: line {}, column '{}': missing value '{}'", source, row, name, cell));
  };

  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(trim(line));
    if (!offset) {
      if (fields.size() == header.size()) {
        offset = 0;
      } else if (fields.size() == header.size() + 1) {
        offset = 1;
      } else {
        throw DataError(
            fmt::format("{}: line {}: expected {} fields, found {}", source, row, header.size(), fields.size()));
      }
    }
    if (fields.size() != header.size() + *offset) {
      throw DataError(fmt::format("{}: line {}: expected {} fields, found {} (ragged row)", source, row,
                                  header.size() + *offset, fields.size()));
    }
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      table.columns[f].push_back(numeric(fields, feature_cols[f], schema.features[f], table.columns[f]));
    }
    if (forecasting) table.target.push_back(numeric(fields, target_col, schema.target, table.target));
    if (!forecasting) {
      const std::string& label = fields[label_col + *offset];
      if (is_missing(label)) {
        throw DataError(fmt::format("{}: line {}, column '{}': missing label", source, row, schema.label));
      }
      table.labels.push_back(label);
    }
    if (seq_col != kAbsent) table.sequence_ids.push_back(fields[seq_col + *offset]);
    if (ts_col != kAbsent) table.timestamps.push_back(fields[ts_col + *offset]);
  }
  return table;
}

RawTable load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open data file '{}'", path));
  return parse_csv(in, schema, path);
}

void write_csv(std::ostream& out, const RawTable& table, const Schema& schema) {
  std::vector<std::string> header;
  if (!schema.sequence.empty()) header.push_back(schema.sequence);
  if (!schema.timestamp.empty()) header.push_back(schema.timestamp);
  for (const auto& n : table.names) header.push_back(n);
  const bool target_is_feature =
      std::find(table.names.begin(), table.names.end(), schema.target) != table.names.end();
  const bool forecasting = schema.task == Task::forecasting;
  if (forecasting && !target_is_feature) header.push_back(schema.target);
  if (!forecasting) header.push_back(schema.label);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << csv_quote(header[i]);
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    std::vector<std::string> cells;
    if (!schema.sequence.empty()) cells.push_back(csv_quote(table.sequence_ids[r]));
    if (!schema.timestamp.empty()) cells.push_back(csv_quote(table.timestamps[r]));
    for (const auto& col : table.columns) cells.push_back(fmt::format("{:.17g}", col[r]));
    if (forecasting && !target_is_feature) cells.push_back(fmt::format("{:.17g}", table.target[r]));
    if (!forecasting) cells.push_back(csv_quote(table.labels[r]));
    out << join(cells) << '\n';
  }
}

namespace {

std::pair<RawTable, RawTable> split_at_row(const RawTable& table, std::size_t cut) {
  auto slice = [&](std::size_t lo, std::size_t hi) {
    RawTable t;
    t.names = table.names;
    for (const auto& col : table.columns) t.columns.emplace_back(col.begin() + lo, col.begin() + hi);
    auto part = [&](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      return v.empty() ? V{} : V(v.begin() + lo, v.begin() + hi);
    };
    t.target = part(table.target);
    t.labels = part(table.labels);
    t.sequence_ids = part(table.sequence_ids);
    t.timestamps = part(table.timestamps);
    return t;
  };
  return {slice(0, cut), slice(cut, table.rows())};
}

}  // namespace

std::pair<RawTable, RawTable> split_chronological(const RawTable& table, double validation_fraction) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError(fmt::format("validation fraction must be in (0, 1), got {}", validation_fraction));
  }
  const std::size_t rows = table.rows();
  const auto val_rows = static_cast<std::size_t>(std::floor(static_cast<double>(rows) * validation_fraction));
  const std::size_t cut = rows - val_rows;
  if (cut == 0 || val_rows == 0) {
    throw DataError(fmt::format("cannot split {} rows with validation fraction {}", rows, validation_fraction));
  }
  return split_at_row(table, cut);
}

// ---- samples --------------------------------------------------------------

std::vector<Sample> make_windows(const RawTable& table, const WindowSpec& spec) {
  spec.validate();
  const std::size_t rows = table.rows();
  if (table.target.size() != rows) throw DataError("make_windows: table has no target column");
  if (rows < spec.history + spec.horizon) {
    throw DataError(fmt::format("series of length {} is shorter than history {} + horizon {}", rows, spec.history,
                                spec.horizon));
  }
  const std::size_t count = (rows - spec.history - spec.horizon) / spec.stride + 1;
  const std::size_t channels = table.columns.size();
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t start = k * spec.stride;
    Sample s;
    s.input = Tensor3({1, channels, spec.history});
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = 0; t < spec.history; ++t) s.input(0, c, t) = table.columns[c][start + t];
    }
    s.target.assign(table.target.begin() + static_cast<std::ptrdiff_t>(start + spec.history),
                    table.target.begin() + static_cast<std::ptrdiff_t>(start + spec.history + spec.horizon));
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<std::string> collect_classes(const RawTable& table) {
  std::set<std::string> distinct(table.labels.begin(), table.labels.end());
  std::vector<std::string> classes(distinct.begin(), distinct.end());
  const bool numeric =
      std::all_of(classes.begin(), classes.end(), [](const std::string& c) { return parse_number(c).has_value(); });
  if (numeric) {
    std::stable_sort(classes.begin(), classes.end(),
                     [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
  }
  return classes;
}

std::vector<Sample> make_sequences(const RawTable& table, const Schema& schema,
                                   const std::vector<std::string>& classes) {
  const std::size_t rows = table.rows();
  const std::size_t channels = table.columns.size();
  auto class_of = [&](std::size_t row) {
    auto it = std::find(classes.begin(), classes.end(), table.labels[row]);
    if (it == classes.end()) {
      throw DataError(fmt::format("row {}: label '{}' is not one of the training classes", row + 1,
                                  table.labels[row]));
    }
    return static_cast<int>(it - classes.begin());
  };
  auto make = [&](std::size_t lo, std::size_t hi, int label) {
    Sample s;
    s.input = Tensor3({1, channels, hi - lo});
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t t = lo; t < hi; ++t) s.input(0, c, t - lo) = table.columns[c][t];
    }
    s.label = label;
    return s;
  };

  std::vector<Sample> samples;
  if (!schema.sequence.empty()) {
    std::unordered_set<std::string> seen;
    std::size_t lo = 0;
    while (lo < rows) {
      const std::string& id = table.sequence_ids[lo];
      if (!seen.insert(id).second) {
        throw DataError(fmt::format("row {}: sequence '{}' is not contiguous", lo + 1, id));
      }
      std::size_t hi = lo + 1;
      while (hi < rows && table.sequence_ids[hi] == id) ++hi;
      const int label = class_of(lo);
      for (std::size_t r = lo; r < hi; ++r) {
        if (table.labels[r] != table.labels[lo]) {
          throw DataError(fmt::format("row {}: sequence '{}' changes label from '{}' to '{}'", r + 1, id,
                                      table.labels[lo], table.labels[r]));
        }
      }
      samples.push_back(make(lo, hi, label));
      lo = hi;
    }
    return samples;
  }
  const std::size_t length = schema.class_window_length;
  if (rows < length) {
    if (rows == 0) return samples;
    throw DataError(fmt::format("{} rows are fewer than window.length {}", rows, length));
  }
  for (std::size_t lo = 0; lo + length <= rows; lo += schema.class_window_stride) {
    samples.push_back(make(lo, lo + length, class_of(lo + length - 1)));
  }
  return samples;
}

DatasetSplit build_split(const RawTable& train, const RawTable& validation, const Schema& schema) {
  DatasetSplit split;
  split.task = schema.task;
  split.channel_names = schema.features;
  if (schema.task == Task::classification) {
    split.classes = collect_classes(train);
    if (split.classes.size() < 2) {
      throw DataError(fmt::format("classification needs at least 2 classes in the training data, found {}",
                                  split.classes.size()));
    }
    split.train = make_sequences(train, schema, split.classes);
    split.validation = make_sequences(validation, schema, split.classes);
  } else {
    split.horizon = schema.forecast_window.horizon;
    split.train = make_windows(train, schema.forecast_window);
    split.validation = make_windows(validation, schema.forecast_window);
  }
  return split;
}

// ---- normalisation --------------------------------------------------------

ChannelStats compute_input_stats(const std::vector<Sample>& samples, std::size_t channels) {
  if (samples.empty()) throw DataError("normalisation needs a non-empty training partition");
  ChannelStats stats;
  for (std::size_t c = 0; c < channels; ++c) {
    CompensatedSum total;
    std::size_t count = 0;
    for (const auto& s : samples) {
      for (std::size_t t = 0; t < s.input.time(); ++t) total.add(s.input(0, c, t));
      count += s.input.time();
    }
    const double mean = total.value() / static_cast<double>(count);
    CompensatedSum sq;
    for (const auto& s : samples) {
      for (std::size_t t = 0; t < s.input.time(); ++t) {
        const double d = s.input(0, c, t) - mean;
        sq.add(d * d);
      }
    }
    const double sd = std::sqrt(sq.value() / static_cast<double>(count));
    stats.mean.push_back(mean);
    stats.scale.push_back(sd > 0.0 ? sd : 1.0);
  }
  return stats;
}

ChannelStats compute_target_stats(const std::vector<Sample>& samples) {
  if (samples.empty()) throw DataError("normalisation needs a non-empty training partition");
  CompensatedSum total;
  std::size_t count = 0;
  for (const auto& s : samples) {
    for (double v : s.target) total.add(v);
    count += s.target.size();
  }
  const double mean = total.value() / static_cast<double>(count);
  CompensatedSum sq;
  for (const auto& s : samples) {
    for (double v : s.target) sq.add((v - mean) * (v - mean));
  }
  const double sd = std::sqrt(sq.value() / static_cast<double>(count));
  return {{mean}, {sd > 0.0 ? sd : 1.0}};
}

void apply_input_stats(std::vector<Sample>& samples, const ChannelStats& stats) {
  for (auto& s : samples) {
    if (s.input.channels() != stats.mean.size()) {
      throw DataError(fmt::format("sample has {} channels, normalisation expects {}", s.input.channels(),
                                  stats.mean.size()));
    }
    for (std::size_t c = 0; c < s.input.channels(); ++c) {
      for (std::size_t t = 0; t < s.input.time(); ++t) {
        s.input(0, c, t) = (s.input(0, c, t) - stats.mean[c]) / stats.scale[c];
      }
    }
  }
}

void apply_target_stats(std::vector<Sample>& samples, const ChannelStats& stats) {
  for (auto& s : samples) {
    for (double& v : s.target) v = (v - stats.mean[0]) / stats.scale[0];
  }
}

DatasetSplit normalize(DatasetSplit split) {
  if (split.normalized()) throw DataError("dataset split is already normalised");
  split.input_stats = compute_input_stats(split.train, split.input_channels());
  apply_input_stats(split.train, split.input_stats);
  apply_input_stats(split.validation, split.input_stats);
  if (split.task == Task::forecasting) {
    split.target_stats = compute_target_stats(split.train);
    apply_target_stats(split.train, split.target_stats);
    apply_target_stats(split.validation, split.target_stats);
  }
  return split;
}

std::uint64_t sample_hash(const Sample& s) {
  // FNV-1a over shape, values, label and target bytes.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const Shape shape = s.input.shape();
  mix(&shape, sizeof shape);
  mix(s.input.data(), s.input.size() * sizeof(double));
  mix(&s.label, sizeof s.label);
  mix(s.target.data(), s.target.size() * sizeof(double));
  return h;
}

bool partitions_disjoint(const DatasetSplit& split) {
  std::unordered_set<std::uint64_t> train;
  for (const auto& s : split.train) train.insert(sample_hash(s));
  return std::none_of(split.validation.begin(), split.validation.end(),
                      [&](const Sample& s) { return train.count(sample_hash(s)) != 0; });
}

// ---- synthetic data -------------------------------------------------------

namespace {

constexpr double kClassificationNoise = 0.5;
constexpr double kForecastNoise = 0.2;
constexpr double kLongPeriod = 96.0;
constexpr double kShortPeriod = 64.0;

RawTable synthetic_classification_table(Rng& rng, std::size_t count, std::size_t length, double noise) {
  RawTable t;
  t.names = {"c1", "c2", "c3"};
  t.columns.assign(3, {});
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 2);
    const double sign = label == 1 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < length; ++k) {
      const double a = rng.normal();
      t.columns[0].push_back(a);
      t.columns[1].push_back(sign * a + noise * rng.normal());
      t.columns[2].push_back(rng.normal());
      t.labels.push_back(std::to_string(label));
      t.sequence_ids.push_back(std::to_string(i));
    }
  }
  return t;
}

}  // namespace

SyntheticData make_synthetic_tables(Task task, std::uint64_t seed, const SynthOptions& options) {
  Rng rng(seed);
  SyntheticData data;
  if (task == Task::classification) {
    const std::size_t size = options.size == 0 ? 128 : options.size;
    if (size < 4) throw std::invalid_argument("synthetic classification needs size >= 4 (2 per class)");
    if (options.time_length == 0) throw std::invalid_argument("synthetic time_length must be >= 1");
    data.noise = options.noise < 0 ? kClassificationNoise : options.noise;
    data.schema.task = Task::classification;
    data.schema.features = {"c1", "c2", "c3"};
    data.schema.label = "label";
    data.schema.sequence = "seq";
    data.train = synthetic_classification_table(rng, size, options.time_length, data.noise);
    data.validation = synthetic_classification_table(rng, size, options.time_length, data.noise);
    return data;
  }

  options.window.validate();
  data.noise = options.noise < 0 ? kForecastNoise : options.noise;
  data.schema.task = Task::forecasting;
  data.schema.features = {"load", "long_sin", "long_cos", "short_sin", "short_cos"};
  data.schema.target = "load";
  data.schema.timestamp = "step";
  data.schema.forecast_window = options.window;
  const std::size_t length = options.size == 0 ? 640 : options.size;
  const std::size_t val_rows = length / 5;
  const std::size_t min_rows = options.window.history + options.window.horizon;
  if (length - val_rows < min_rows || val_rows < min_rows) {
    throw std::invalid_argument(
        fmt::format("synthetic forecasting series of {} points is too short for 80/20 windows of {}", length,
                    min_rows));
  }
  const double phase_long = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_short = rng.uniform(0.0, 2.0 * std::numbers::pi);
  RawTable all;
  all.names = data.schema.features;
  all.columns.assign(5, {});
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i);
    const double a = 2.0 * std::numbers::pi * t / kLongPeriod + phase_long;
    const double b = 2.0 * std::numbers::pi * t / kShortPeriod + phase_short;
    const double clean = 5.0 + 2.0 * std::sin(a) + std::sin(b);
    const double load = clean + data.noise * rng.normal();
    data.clean_target.push_back(clean);
    all.columns[0].push_back(load);
    all.columns[1].push_back(std::sin(a));
    all.columns[2].push_back(std::cos(a));
    all.columns[3].push_back(std::sin(b));
    all.columns[4].push_back(std::cos(b));
    all.target.push_back(load);
    all.timestamps.push_back(std::to_string(i));
  }
  auto [train, validation] = split_at_row(all, length - val_rows);
  data.train = std::move(train);
  data.validation = std::move(validation);
  return data;
}

DatasetSplit make_synthetic(Task task, std::uint64_t seed, const SynthOptions& options) {
  const SyntheticData data = make_synthetic_tables(task, seed, options);
  return build_split(data.train, data.validation, data.schema);
}

}  // namespace gres2net
