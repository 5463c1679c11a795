#include "gres2net/res2net.hpp"

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

void BlockConfig::validate() const {
  if (in_channels == 0) throw ShapeError("block: in_channels must be >= 1");
  if (scales < 2) throw ShapeError(fmt::format("block: scales (s) must be >= 2, got {}", scales));
  if (width == 0) throw ShapeError("block: width (w) must be >= 1");
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ShapeError(fmt::format("block: kernel_size must be odd and >= 1, got {}", kernel_size));
  }
}

GateUnit::GateUnit(const std::string& name, std::size_t expanded, std::size_t width, std::size_t gate_channels,
                   Rng& rng)
    : proj_X(name + ".proj_X", expanded, gate_channels, 1, rng),
      proj_y(name + ".proj_y", width, gate_channels, 1, rng),
      proj_x(name + ".proj_x", width, gate_channels, 1, rng),
      fuse(name + ".fuse", 3 * gate_channels, width, 1, rng) {}

void GateUnit::collect(std::vector<Parameter*>& out) {
  proj_X.collect(out);
  proj_y.collect(out);
  proj_x.collect(out);
  fuse.collect(out);
}

Var gate_compute(Tape& tape, GateUnit& gate, Var X, Var y_prev, Var x_i) {
  const Shape& xs = X.shape();
  if (y_prev.shape() != x_i.shape() || y_prev.shape().batch != xs.batch || y_prev.shape().time != xs.time) {
    throw ShapeError(fmt::format("gate: incompatible shapes X {}, y_prev {}, x_i {}", xs.str(),
                                 y_prev.shape().str(), x_i.shape().str()));
  }
  const Var parts[] = {gate.proj_X(tape, X), gate.proj_y(tape, y_prev), gate.proj_x(tape, x_i)};
  return tanh(gate.fuse(tape, concat_channels(parts)));
}

Block::Block(const std::string& name, const BlockConfig& cfg, Rng& rng) : config(cfg) {
  config.validate();
  const std::size_t n = config.expanded_channels();
  const std::size_t w = config.width;
  expand = Conv1d(name + ".expand", config.in_channels, n, 1, rng);
  group_convs.reserve(config.scales - 1);
  for (std::size_t i = 2; i <= config.scales; ++i) {
    group_convs.emplace_back(fmt::format("{}.K{}", name, i), w, w, config.kernel_size, rng);
  }
  gates.reserve(config.scales - 2);
  for (std::size_t i = 3; i <= config.scales; ++i) {
    gates.emplace_back(fmt::format("{}.gate{}", name, i), n, w, config.resolved_gate_channels(), rng);
  }
  compress = Conv1d(name + ".compress", n, config.resolved_out_channels(), 1, rng);
}

void Block::collect(std::vector<Parameter*>& out) {
  expand.collect(out);
  for (auto& k : group_convs) k.collect(out);
  for (auto& g : gates) g.collect(out);
  compress.collect(out);
}

namespace {

Var block_forward(Tape& tape, Block& block, Var input, bool gated, const BlockOptions& options, BlockTrace* trace) {
  const BlockConfig& cfg = block.config;
  if (input.shape().channels != cfg.in_channels) {
    throw ShapeError(fmt::format("block: input has {} channels, block expects {}", input.shape().channels,
                                 cfg.in_channels));
  }
  const Var X = block.expand(tape, input);
  const std::vector<Var> x = split_channels(X, cfg.scales);
  std::vector<Var> y(cfg.scales);
  y[0] = x[0];
  y[1] = block.group_convs[0](tape, x[1]);
  for (std::size_t i = 2; i < cfg.scales; ++i) {
    Var carried = y[i - 1];
    if (gated) {
      const Var g = options.gate_override
                        ? tape.constant(Tensor3(y[i - 1].shape(), *options.gate_override))
                        : gate_compute(tape, block.gates[i - 2], X, y[i - 1], x[i]);
      if (trace != nullptr) trace->gates.push_back(g);
      carried = mul(g, y[i - 1]);
    }
    y[i] = block.group_convs[i - 1](tape, add(x[i], carried));
  }
  if (trace != nullptr) {
    trace->expanded = X;
    trace->groups = y;
  }
  return block.compress(tape, concat_channels(y));
}

}  // namespace

Var res2net_block_forward(Tape& tape, Block& block, Var input, BlockTrace* trace) {
  return block_forward(tape, block, input, false, {}, trace);
}

Var gres2net_block_forward(Tape& tape, Block& block, Var input, const BlockOptions& options, BlockTrace* trace) {
  return block_forward(tape, block, input, true, options, trace);
}

Backbone::Backbone(const std::string& name, const std::vector<BlockConfig>& configs, const std::vector<bool>& gated_,
                   Activation act, Rng& rng)
    : gated(gated_), activation(act) {
  if (configs.size() != gated.size()) {
    throw ShapeError(fmt::format("backbone: {} block configs but {} gated flags", configs.size(), gated.size()));
  }
  blocks.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (i > 0 && configs[i].in_channels != configs[i - 1].resolved_out_channels()) {
      throw ShapeError(fmt::format("backbone: block {} expects {} input channels but block {} emits {}", i,
                                   configs[i].in_channels, i - 1, configs[i - 1].resolved_out_channels()));
    }
    blocks.emplace_back(fmt::format("{}.block{}", name, i), configs[i], rng);
  }
}

std::size_t Backbone::output_channels(std::size_t input_channels) const {
  return blocks.empty() ? input_channels : blocks.back().config.resolved_out_channels();
}

Var Backbone::forward(Tape& tape, Var input, const BlockOptions& options) {
  Var h = input;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    h = gated[i] ? gres2net_block_forward(tape, blocks[i], h, options) : res2net_block_forward(tape, blocks[i], h);
    if (activation == Activation::relu) h = relu(h);
  }
  return h;
}

void Backbone::collect(std::vector<Parameter*>& out) {
  for (auto& b : blocks) b.collect(out);
}

}  // namespace gres2net
