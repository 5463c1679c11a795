#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gres2net/data.hpp"
#include "gres2net/model.hpp"
#include "gres2net/train.hpp"

namespace gres2net {

/// Binary layout (all integers little-endian):
///
///     "GR2NCKPT"  u32 version
///     u64 length, topology text      (ModelSpec::to_text)
///     u64 length, state text         (epoch counters, RNG state)
///     u64 array count, then per array:
///         u32 length, name
///         u64 batch, u64 channels, u64 time
///         f64 values, row-major
///     "END!"
///
/// Arrays: "param:<name>" always; "norm.*" / "target.*" when the training data
/// was normalised; "adam.m:<name>", "adam.v:<name>", "best:<name>",
/// "adam.hyper" and "state.best_metric" when a training state is attached.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelSpec spec;
  std::vector<std::string> param_names;
  std::vector<Tensor3> params;
  ChannelStats input_stats;
  ChannelStats target_stats;
  std::optional<TrainState> state;

  bool operator==(const Checkpoint&) const = default;
};

/// Captures the model's current parameters and the data normalisation.
Checkpoint make_checkpoint(const Model& model, const DatasetSplit& data, const TrainState* state = nullptr);

/// Rebuilds the model from the topology and loads every parameter.
std::unique_ptr<Model> build_model(const Checkpoint& ckpt);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws CheckpointError on bad magic, unknown version, truncation or
/// arrays that do not match the topology.
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>");

/// Writes to a temporary sibling and renames, so a failed save leaves no partial file.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace gres2net
