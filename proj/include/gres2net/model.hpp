#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gres2net/data.hpp"
#include "gres2net/nn.hpp"
#include "gres2net/res2net.hpp"

namespace gres2net {

enum class ModelKind { gres2net, res2net, lstm };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Everything needed to rebuild a model without the original run config.
///
/// Topology: backbone (stacked blocks, or a stacked LSTM) -> global average
/// pooling over time -> dense(hidden) -> relu -> dropout -> dense(outputs).
/// With head_hidden = 0 the hidden dense layer is skipped.
struct ModelSpec {
  ModelKind kind = ModelKind::gres2net;
  Task task = Task::classification;
  std::size_t input_channels = 1;
  std::size_t outputs = 2;
  std::vector<BlockConfig> blocks;
  Activation block_activation = Activation::relu;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 8;
  bool lstm_bidirectional = true;
  std::size_t head_hidden = 64;
  double dropout = 0.5;
  std::vector<std::string> channel_names;
  std::vector<std::string> classes;

  /// Default channel plan: `count` blocks, each expanding to s*w channels and
  /// compressing back to s*w, the first one reading `input_channels`.
  static std::vector<BlockConfig> default_blocks(std::size_t input_channels, std::size_t count = 2,
                                                 std::size_t scales = 4, std::size_t width = 16,
                                                 std::size_t kernel_size = 3);

  void validate() const;
  /// Resolves derived block widths and resets fields the model kind ignores,
  /// so that from_text(to_text()) reproduces the spec exactly.
  ModelSpec canonical() const;
  std::string to_text() const;
  static ModelSpec from_text(const std::string& text);
  bool operator==(const ModelSpec&) const = default;
};

class Model {
 public:
  /// Initialises all parameters from `seed`.
  Model(const ModelSpec& spec, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelSpec& spec() const { return spec_; }

  /// x: (B, input_channels, T) -> (B, outputs, 1) logits or forecasts.
  Var forward(Tape& tape, Var x, Mode mode, Rng& rng, const BlockOptions& options = {});

  /// Stable order; names are unique.
  const std::vector<Parameter*>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  std::vector<Tensor3> snapshot() const;
  /// Shapes must match parameters() one to one.
  void restore(const std::vector<Tensor3>& values);

 private:
  ModelSpec spec_;
  Backbone backbone_;
  LstmStack lstm_;
  Dense hidden_;
  Dense output_;
  std::vector<Parameter*> params_;
};

}  // namespace gres2net
