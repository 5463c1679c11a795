#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gres2net/nn.hpp"

namespace gres2net {

/// Shape of one (gated) hierarchical residual block.
///
/// The input is expanded by a k=1 conv to n = scales * width channels, split
/// into `scales` groups of `width` channels, processed group by group, then
/// concatenated and compressed by a k=1 conv to `out_channels`.
struct BlockConfig {
  std::size_t in_channels = 1;
  std::size_t scales = 4;        ///< s, number of groups, >= 2
  std::size_t width = 16;        ///< w, channels per group, >= 1
  std::size_t kernel_size = 3;   ///< per-group conv kernel, odd
  std::size_t gate_channels = 0; ///< projection width inside the gate unit; 0 means `width`
  std::size_t out_channels = 0;  ///< compression output; 0 means scales * width

  std::size_t expanded_channels() const { return scales * width; }
  std::size_t resolved_gate_channels() const { return gate_channels == 0 ? width : gate_channels; }
  std::size_t resolved_out_channels() const { return out_channels == 0 ? expanded_channels() : out_channels; }

  /// Throws ShapeError on any violated constraint.
  void validate() const;
  bool operator==(const BlockConfig&) const = default;
};

/// Computes the gate for group i from the expanded features X (n channels),
/// the previous group output y_{i-1} and the current group input x_i (w
/// channels each):
///
///   g_i = tanh(fuse(concat(proj_X(X), proj_y(y_{i-1}), proj_x(x_i))))
///
/// All four maps are k=1 convolutions with bias; the three projections share
/// the width `gate_channels` and `fuse` brings 3*gate_channels back to w.
struct GateUnit {
  Conv1d proj_X;
  Conv1d proj_y;
  Conv1d proj_x;
  Conv1d fuse;

  GateUnit() = default;
  GateUnit(const std::string& name, std::size_t expanded, std::size_t width, std::size_t gate_channels, Rng& rng);

  void collect(std::vector<Parameter*>& out);
};

Var gate_compute(Tape& tape, GateUnit& gate, Var X, Var y_prev, Var x_i);

/// Test hooks and optional introspection for a block forward pass.
struct BlockOptions {
  /// Replace every gate g_i by a constant tensor of this value.
  std::optional<double> gate_override;
};

/// Intermediate values of one block forward, for inspection in tests.
struct BlockTrace {
  Var expanded;               ///< X
  std::vector<Var> groups;    ///< y_1 .. y_s before concatenation
  std::vector<Var> gates;     ///< g_3 .. g_s (empty for the ungated block)
};

struct Block {
  BlockConfig config;
  Conv1d expand;
  std::vector<Conv1d> group_convs;  ///< K_2 .. K_s
  std::vector<GateUnit> gates;      ///< gate units for groups 3 .. s
  Conv1d compress;

  Block() = default;
  Block(const std::string& name, const BlockConfig& config, Rng& rng);

  void collect(std::vector<Parameter*>& out);
};

/// Ungated block: y_1 = x_1, y_2 = K_2(x_2), y_i = K_i(x_i + y_{i-1}) for i > 2.
Var res2net_block_forward(Tape& tape, Block& block, Var input, BlockTrace* trace = nullptr);

/// Gated block: as above but y_i = K_i(x_i + g_i * y_{i-1}) for i > 2, with g_i
/// from gate_compute (or the override constant).
Var gres2net_block_forward(Tape& tape, Block& block, Var input, const BlockOptions& options = {},
                           BlockTrace* trace = nullptr);

enum class Activation { none, relu };

/// Blocks applied in sequence, each gated or ungated, with an optional
/// activation after every block.
struct Backbone {
  std::vector<Block> blocks;
  std::vector<bool> gated;
  Activation activation = Activation::relu;

  Backbone() = default;
  /// Throws ShapeError if a block's input channels differ from the previous block's output.
  Backbone(const std::string& name, const std::vector<BlockConfig>& configs, const std::vector<bool>& gated,
           Activation activation, Rng& rng);

  std::size_t output_channels(std::size_t input_channels) const;
  Var forward(Tape& tape, Var input, const BlockOptions& options = {});
  void collect(std::vector<Parameter*>& out);
};

}  // namespace gres2net
