#include "gres2net/model.hpp"

#include <fmt/format.h>

#include "gres2net/error.hpp"
#include "gres2net/keyvalue.hpp"

namespace gres2net {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gres2net: return "gres2net";
    case ModelKind::res2net: return "res2net";
    case ModelKind::lstm: return "lstm";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "gres2net") return ModelKind::gres2net;
  if (text == "res2net") return ModelKind::res2net;
  if (text == "lstm") return ModelKind::lstm;
  throw ConfigError(fmt::format("unknown model '{}' (expected gres2net, res2net or lstm)", text));
}

std::vector<BlockConfig> ModelSpec::default_blocks(std::size_t input_channels, std::size_t count, std::size_t scales,
                                                   std::size_t width, std::size_t kernel_size) {
  std::vector<BlockConfig> blocks;
  std::size_t in = input_channels;
  for (std::size_t i = 0; i < count; ++i) {
    BlockConfig b;
    b.in_channels = in;
    b.scales = scales;
    b.width = width;
    b.kernel_size = kernel_size;
    blocks.push_back(b);
    in = b.resolved_out_channels();
  }
  return blocks;
}

void ModelSpec::validate() const {
  if (input_channels == 0) throw ConfigError("model: input_channels must be >= 1");
  if (outputs == 0) throw ConfigError("model: outputs must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(fmt::format("model: dropout {} outside [0, 1)", dropout));
  if (task == Task::classification && outputs < 2) throw ConfigError("model: classification needs >= 2 outputs");
  if (kind == ModelKind::lstm) {
    if (lstm_hidden == 0 || lstm_layers == 0) throw ConfigError("model: lstm hidden size and layers must be >= 1");
  } else {
    std::size_t in = input_channels;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].validate();
      if (blocks[i].in_channels != in) {
        throw ConfigError(fmt::format("model: block {} expects {} input channels, previous stage emits {}", i,
                                      blocks[i].in_channels, in));
      }
      in = blocks[i].resolved_out_channels();
    }
  }
}

ModelSpec ModelSpec::canonical() const {
  ModelSpec c = *this;
  const ModelSpec defaults;
  if (kind == ModelKind::lstm) {
    c.blocks.clear();
    c.block_activation = defaults.block_activation;
  } else {
    c.lstm_hidden = defaults.lstm_hidden;
    c.lstm_layers = defaults.lstm_layers;
    c.lstm_bidirectional = defaults.lstm_bidirectional;
    for (auto& b : c.blocks) {
      b.gate_channels = b.resolved_gate_channels();
      b.out_channels = b.resolved_out_channels();
    }
  }
  return c;
}

std::string ModelSpec::to_text() const {
  KeyValues kv;
  kv.set("model", to_string(kind));
  kv.set("task", gres2net::to_string(task));
  kv.set("input_channels", std::to_string(input_channels));
  kv.set("outputs", std::to_string(outputs));
  kv.set("head.hidden", std::to_string(head_hidden));
  kv.set("head.dropout", fmt::format("{:.17g}", dropout));
  kv.set("channels", join(channel_names));
  kv.set("classes", join(classes));
  if (kind == ModelKind::lstm) {
    kv.set("lstm.hidden", std::to_string(lstm_hidden));
    kv.set("lstm.layers", std::to_string(lstm_layers));
    kv.set("lstm.bidirectional", lstm_bidirectional ? "true" : "false");
  } else {
    kv.set("blocks", std::to_string(blocks.size()));
    kv.set("block.activation", block_activation == Activation::relu ? "relu" : "none");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      const std::string p = fmt::format("block{}.", i);
      kv.set(p + "in_channels", std::to_string(b.in_channels));
      kv.set(p + "scales", std::to_string(b.scales));
      kv.set(p + "width", std::to_string(b.width));
      kv.set(p + "kernel_size", std::to_string(b.kernel_size));
      kv.set(p + "gate_channels", std::to_string(b.resolved_gate_channels()));
      kv.set(p + "out_channels", std::to_string(b.resolved_out_channels()));
    }
  }
  return kv.to_text();
}

ModelSpec ModelSpec::from_text(const std::string& text) {
  const KeyValues kv = KeyValues::parse(text, "<topology>");
  ModelSpec spec;
  spec.kind = parse_model_kind(kv.get_string("model"));
  spec.task = parse_task(kv.get_string("task"));
  spec.input_channels = kv.get_size("input_channels", 0);
  spec.outputs = kv.get_size("outputs", 0);
  spec.head_hidden = kv.get_size("head.hidden", 0);
  spec.dropout = kv.get_double("head.dropout", 0.0);
  spec.channel_names = kv.get_list("channels");
  spec.classes = kv.get_list("classes");
  if (spec.kind == ModelKind::lstm) {
    spec.lstm_hidden = kv.get_size("lstm.hidden", 0);
    spec.lstm_layers = kv.get_size("lstm.layers", 0);
    spec.lstm_bidirectional = kv.get_bool("lstm.bidirectional", true);
  } else {
    const std::string act = kv.get_string("block.activation", "relu");
    if (act != "relu" && act != "none") throw ConfigError(fmt::format("topology: unknown activation '{}'", act));
    spec.block_activation = act == "relu" ? Activation::relu : Activation::none;
    const std::size_t count = kv.get_size("blocks", 0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::string p = fmt::format("block{}.", i);
      BlockConfig b;
      b.in_channels = kv.get_size(p + "in_channels", 0);
      b.scales = kv.get_size(p + "scales", 0);
      b.width = kv.get_size(p + "width", 0);
      b.kernel_size = kv.get_size(p + "kernel_size", 0);
      b.gate_channels = kv.get_size(p + "gate_channels", 0);
      b.out_channels = kv.get_size(p + "out_channels", 0);
      spec.blocks.push_back(b);
    }
  }
  spec.validate();
  return spec;
}

Model::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec.canonical()) {
  spec_.validate();
  Rng rng(derive_seed(seed, 1));
  std::size_t features = spec_.input_channels;
  if (spec_.kind == ModelKind::lstm) {
    lstm_ = LstmStack("lstm", spec_.input_channels, spec_.lstm_hidden, spec_.lstm_layers, spec_.lstm_bidirectional,
                      rng);
    features = lstm_.output_channels();
    lstm_.collect(params_);
  } else {
    const std::vector<bool> gated(spec_.blocks.size(), spec_.kind == ModelKind::gres2net);
    backbone_ = Backbone("backbone", spec_.blocks, gated, spec_.block_activation, rng);
    features = backbone_.output_channels(spec_.input_channels);
    backbone_.collect(params_);
  }
  if (spec_.head_hidden > 0) {
    hidden_ = Dense("head.hidden", features, spec_.head_hidden, rng);
    features = spec_.head_hidden;
    hidden_.collect(params_);
  }
  output_ = Dense("head.output", features, spec_.outputs, rng);
  output_.collect(params_);
}

Var Model::forward(Tape& tape, Var x, Mode mode, Rng& rng, const BlockOptions& options) {
  if (x.shape().channels != spec_.input_channels) {
    throw ShapeError(fmt::format("model expects {} input channels, got {}", spec_.input_channels,
                                 x.shape().channels));
  }
  Var h = spec_.kind == ModelKind::lstm ? lstm_(tape, x) : backbone_.forward(tape, x, options);
  h = global_avg_pool(h);
  if (spec_.head_hidden > 0) h = relu(hidden_(tape, h));
  h = dropout(h, spec_.dropout, mode, rng);
  return output_(tape, h);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : params_) n += p->value.size();
  return n;
}

std::vector<Tensor3> Model::snapshot() const {
  std::vector<Tensor3> out;
  out.reserve(params_.size());
  for (const Parameter* p : params_) out.push_back(p->value);
  return out;
}

void Model::restore(const std::vector<Tensor3>& values) {
  if (values.size() != params_.size()) {
    throw ShapeError(fmt::format("restore: {} arrays for {} parameters", values.size(), params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i]->value.shape()) {
      throw ShapeError(fmt::format("restore: parameter '{}' has shape {}, got {}", params_[i]->name,
                                   params_[i]->value.shape().str(), values[i].shape().str()));
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

}  // namespace gres2net
