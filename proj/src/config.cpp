#include "gres2net/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gres2net/error.hpp"
#include "gres2net/keyvalue.hpp"

namespace gres2net {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (!synthetic) {
    if (schema_path.empty()) throw ConfigError("key 'data.schema' is required when data.source = files");
    if (train_path.empty()) throw ConfigError("key 'data.train' is required when data.source = files");
    for (const auto& [key, path] :
         {std::pair{"data.schema", schema_path}, {"data.train", train_path}, {"data.validation", validation_path}}) {
      if (!path.empty() && !fs::exists(path)) throw ConfigError(fmt::format("key '{}': file '{}' not found", key, path));
    }
  }
  if (model != ModelKind::lstm) {
    if (blocks == 0) throw ConfigError("key 'model.blocks' must be >= 1");
    if (scales < 2) throw ConfigError("key 'model.scales' must be >= 2");
    if (width == 0) throw ConfigError("key 'model.width' must be >= 1");
    if (kernel_size % 2 == 0) throw ConfigError("key 'model.kernel_size' must be odd");
  } else if (lstm_hidden == 0 || lstm_layers == 0) {
    throw ConfigError("keys 'lstm.hidden' and 'lstm.layers' must be >= 1");
  }
  if (train.eval_repeats == 0) throw ConfigError("key 'train.repeats' must be >= 1");
}

std::string RunConfig::to_text() const {
  KeyValues kv;
  kv.set("task", to_string(task));
  kv.set("model", gres2net::to_string(model));
  kv.set("out", out);
  kv.set("data.source", synthetic ? "synthetic" : "files");
  if (synthetic) {
    kv.set("synthetic.seed", std::to_string(synthetic_seed));
    kv.set("synthetic.size", std::to_string(synth.size));
    kv.set("synthetic.noise", fmt::format("{:.17g}", synth.noise));
    kv.set("synthetic.time_length", std::to_string(synth.time_length));
  } else {
    kv.set("data.schema", schema_path);
    kv.set("data.train", train_path);
    if (!validation_path.empty()) kv.set("data.validation", validation_path);
    kv.set("data.validation_fraction", fmt::format("{:.17g}", validation_fraction));
  }
  kv.set("train.lr0", fmt::format("{:.17g}", train.lr0));
  kv.set("train.epochs", std::to_string(train.epochs));
  kv.set("train.decay_every", std::to_string(train.decay_every));
  kv.set("train.decay_factor", fmt::format("{:.17g}", train.decay_factor));
  kv.set("train.batch_size", std::to_string(train.batch_size));
  kv.set("train.dropout", fmt::format("{:.17g}", train.dropout));
  kv.set("train.seed", std::to_string(train.seed));
  kv.set("train.repeats", std::to_string(train.eval_repeats));
  kv.set("train.repeat_mode", repeat_mode == RepeatMode::eval ? "eval" : "retrain");
  kv.set("model.blocks", std::to_string(blocks));
  kv.set("model.scales", std::to_string(scales));
  kv.set("model.width", std::to_string(width));
  kv.set("model.kernel_size", std::to_string(kernel_size));
  kv.set("model.gate_channels", std::to_string(gate_channels));
  kv.set("model.activation", activation == Activation::relu ? "relu" : "none");
  kv.set("lstm.hidden", std::to_string(lstm_hidden));
  kv.set("lstm.layers", std::to_string(lstm_layers));
  kv.set("lstm.bidirectional", lstm_bidirectional ? "true" : "false");
  kv.set("head.hidden", std::to_string(head_hidden));
  return kv.to_text();
}

RunConfig parse_run_config(const std::string& text, const std::string& source, const std::string& base_dir) {
  const KeyValues kv = KeyValues::parse(text, source);
  kv.require_known({"task", "model", "out", "data.source", "data.schema", "data.train", "data.validation",
                    "data.validation_fraction", "synthetic.seed", "synthetic.size", "synthetic.noise",
                    "synthetic.time_length", "train.lr0", "train.epochs", "train.decay_every", "train.decay_factor",
                    "train.batch_size", "train.dropout", "train.seed", "train.repeats", "train.repeat_mode",
                    "model.blocks", "model.scales", "model.width", "model.kernel_size", "model.gate_channels",
                    "model.activation", "lstm.hidden", "lstm.layers", "lstm.bidirectional", "head.hidden"});
  RunConfig c;
  auto enum_error = [&](const char* key, const std::string& value, const char* expected) {
    return ConfigError(fmt::format("{}: key '{}': expected {}, got '{}'", source, key, expected, value));
  };
  try {
    c.task = parse_task(kv.get_string("task", "classification"));
  } catch (const ConfigError&) {
    throw enum_error("task", kv.get_string("task"), "classification or forecasting");
  }
  try {
    c.model = parse_model_kind(kv.get_string("model", "gres2net"));
  } catch (const ConfigError&) {
    throw enum_error("model", kv.get_string("model"), "gres2net, res2net or lstm");
  }
  c.out = resolve(base_dir, kv.get_string("out", "run"));

  const std::string src = kv.get_string("data.source", "files");
  if (src != "files" && src != "synthetic") throw enum_error("data.source", src, "files or synthetic");
  c.synthetic = src == "synthetic";
  c.schema_path = resolve(base_dir, kv.get_string("data.schema", ""));
  c.train_path = resolve(base_dir, kv.get_string("data.train", ""));
  c.validation_path = resolve(base_dir, kv.get_string("data.validation", ""));
  c.validation_fraction = kv.get_double("data.validation_fraction", 0.2);
  c.synthetic_seed = kv.get_u64("synthetic.seed", 0);
  c.synth.size = kv.get_size("synthetic.size", c.synth.size);
  c.synth.noise = kv.get_double("synthetic.noise", c.synth.noise);
  c.synth.time_length = kv.get_size("synthetic.time_length", c.synth.time_length);

  c.train = TrainConfig::defaults_for(c.task);
  c.train.lr0 = kv.get_double("train.lr0", c.train.lr0);
  c.train.epochs = kv.get_size("train.epochs", c.train.epochs);
  c.train.decay_every = kv.get_size("train.decay_every", c.train.decay_every);
  c.train.decay_factor = kv.get_double("train.decay_factor", c.train.decay_factor);
  c.train.batch_size = kv.get_size("train.batch_size", c.train.batch_size);
  c.train.dropout = kv.get_double("train.dropout", c.train.dropout);
  c.train.seed = kv.get_u64("train.seed", c.train.seed);
  c.train.eval_repeats = kv.get_size("train.repeats", c.train.eval_repeats);
  const std::string mode = kv.get_string("train.repeat_mode", "eval");
  if (mode != "eval" && mode != "retrain") throw enum_error("train.repeat_mode", mode, "eval or retrain");
  c.repeat_mode = mode == "eval" ? RepeatMode::eval : RepeatMode::retrain;

  c.blocks = kv.get_size("model.blocks", c.blocks);
  c.scales = kv.get_size("model.scales", c.scales);
  c.width = kv.get_size("model.width", c.width);
  c.kernel_size = kv.get_size("model.kernel_size", c.kernel_size);
  c.gate_channels = kv.get_size("model.gate_channels", c.gate_channels);
  const std::string act = kv.get_string("model.activation", "relu");
  if (act != "relu" && act != "none") throw enum_error("model.activation", act, "relu or none");
  c.activation = act == "relu" ? Activation::relu : Activation::none;
  c.lstm_hidden = kv.get_size("lstm.hidden", c.lstm_hidden);
  c.lstm_layers = kv.get_size("lstm.layers", c.lstm_layers);
  c.lstm_bidirectional = kv.get_bool("lstm.bidirectional", c.lstm_bidirectional);
  c.head_hidden = kv.get_size("head.hidden", c.head_hidden);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path, fs::path(path).parent_path().string());
}

DatasetSplit load_run_data(const RunConfig& config, bool normalise) {
  auto finish = [normalise](DatasetSplit split) { return normalise ? normalize(std::move(split)) : split; };
  if (config.synthetic) return finish(make_synthetic(config.task, config.synthetic_seed, config.synth));
  const Schema schema = load_schema(config.schema_path);
  if (schema.task != config.task) {
    throw ConfigError(fmt::format("schema '{}' is for {}, config task is {}", config.schema_path,
                                  to_string(schema.task), to_string(config.task)));
  }
  const RawTable train = load_csv(config.train_path, schema);
  if (!config.validation_path.empty()) {
    return finish(build_split(train, load_csv(config.validation_path, schema), schema));
  }
  const auto [head, tail] = split_chronological(train, config.validation_fraction);
  return finish(build_split(head, tail, schema));
}

ModelSpec make_model_spec(const RunConfig& config, const DatasetSplit& data) {
  ModelSpec spec;
  spec.kind = config.model;
  spec.task = config.task;
  spec.input_channels = data.input_channels();
  spec.outputs = data.num_outputs();
  spec.channel_names = data.channel_names;
  spec.classes = data.classes;
  spec.head_hidden = config.head_hidden;
  spec.dropout = config.train.dropout;
  spec.block_activation = config.activation;
  spec.lstm_hidden = config.lstm_hidden;
  spec.lstm_layers = config.lstm_layers;
  spec.lstm_bidirectional = config.lstm_bidirectional;
  if (config.model != ModelKind::lstm) {
    spec.blocks = ModelSpec::default_blocks(spec.input_channels, config.blocks, config.scales, config.width,
                                            config.kernel_size);
    for (auto& b : spec.blocks) b.gate_channels = config.gate_channels;
  }
  spec.validate();
  return spec;
}

}  // namespace gres2net
