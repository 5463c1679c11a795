#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gres2net/rng.hpp"
#include "gres2net/tape.hpp"

namespace gres2net {

enum class Mode { train, eval };

// ---- differentiable layer ops -------------------------------------------

/// Same-padded 1-D cross-correlation, stride 1.
/// x: (B, in, T), weight: (out, in, k), bias: (1, out, 1) -> (B, out, T).
/// Left pad is (k-1)/2, the rest goes right, so T is preserved for any k.
Tensor3 conv1d(const Tensor3& x, const Tensor3& weight, const Tensor3& bias);
Var conv1d(Var x, Var weight, Var bias);

/// y = W x + b per batch element. x: (B, in, 1), weight: (out, in, 1), bias: (1, out, 1) or none.
Var linear(Var x, Var weight, Var bias = {});

/// Mean over time: (B, C, T) -> (B, C, 1).
Var global_avg_pool(Var x);

/// Inverted dropout: in train mode each element is zeroed with probability p and
/// survivors are scaled by 1/(1-p); eval mode (or p = 0) is the identity.
Var dropout(Var x, double p, Mode mode, Rng& rng);

// ---- layers owning parameters -------------------------------------------

/// Uniform in +-sqrt(1/fan_in).
Tensor3 init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

struct Conv1d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 1;
  Parameter weight;
  Parameter bias;

  Conv1d() = default;
  Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);

  Var operator()(Tape& tape, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Parameter weight;
  Parameter bias;

  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng);

  /// x: (B, in, 1) -> (B, out, 1).
  Var operator()(Tape& tape, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct LstmState {
  Var h;  ///< (B, hidden, 1)
  Var s;  ///< (B, hidden, 1), the cell state
};

/// One LSTM cell: candidate g = tanh, gates i/f/o = sigmoid,
/// s = g*i + s_prev*f, h = tanh(s)*o.
struct LstmCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  // Input and recurrent weights of the candidate (g) and the input/forget/output gates.
  Parameter w_gx, w_gh, w_ix, w_ih, w_fx, w_fh, w_ox, w_oh;
  Parameter b_g, b_i, b_f, b_o;

  LstmCell() = default;
  LstmCell(std::string name, std::size_t input, std::size_t hidden, Rng& rng);

  /// x: (B, input, 1).
  LstmState step(Tape& tape, Var x, const LstmState& prev);
  /// Zero (h, s) for a batch of `batch`.
  LstmState initial_state(Tape& tape, std::size_t batch) const;
  void collect(std::vector<Parameter*>& out);
};

/// Stacked, optionally bidirectional LSTM over (B, C, T) input.
/// Each layer's output is (B, hidden, T), or (B, 2*hidden, T) when bidirectional
/// with forward channels first and the time-reversed pass realigned to the
/// original time index.
struct LstmStack {
  std::size_t layers = 0;
  bool bidirectional = false;
  std::vector<LstmCell> forward_cells;
  std::vector<LstmCell> backward_cells;

  LstmStack() = default;
  LstmStack(std::string name, std::size_t input, std::size_t hidden, std::size_t layers, bool bidirectional,
            Rng& rng);

  std::size_t output_channels() const;
  Var operator()(Tape& tape, Var x);
  void collect(std::vector<Parameter*>& out);
};

/// Runs one direction of a cell over time; `reverse` walks from T-1 to 0 but
/// writes each output at its own time index.
Var lstm_sequence(Tape& tape, LstmCell& cell, Var x, bool reverse);

}  // namespace gres2net
