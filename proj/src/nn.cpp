#include "gres2net/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

namespace {

void check_conv_shapes(const Tensor3& x, const Tensor3& weight, const Tensor3& bias) {
  if (x.channels() != weight.channels()) {
    throw ShapeError(fmt::format("conv1d: input has {} channels, weight {} expects {}", x.channels(),
                                 weight.shape().str(), weight.channels()));
  }
  if (bias.shape() != Shape{1, weight.batch(), 1}) {
    throw ShapeError(fmt::format("conv1d: bias {} does not match {} output channels", bias.shape().str(),
                                 weight.batch()));
  }
}

// Unrolled input: row (c, j) holds channel c shifted by tap j, with batch and
// time flattened into columns (b * T + t); out-of-range taps are zero.
void im2col(const Tensor3& x, std::size_t k, std::vector<double>& out) {
  const std::size_t batch = x.batch(), in = x.channels(), time = x.time(), cols = batch * time;
  const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const auto T = static_cast<std::ptrdiff_t>(time);
  out.assign(in * k * cols, 0.0);
  for (std::size_t c = 0; c < in; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(T, T - shift);
      double* row = out.data() + (c * k + j) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xc = x.data() + x.index(b, c, 0);
        double* dst = row + b * time;
        for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] = xc[t + shift];
      }
    }
  }
}

inline void axpy(double* __restrict y, const double* __restrict x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// C (m x n) += A (m x k) * B (k x n), row-major. Each C element accumulates
// over p in ascending order.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B, double* C) {
  constexpr std::size_t kTile = 256;
  for (std::size_t i0 = 0; i0 < m; i0 += 4) {
    const std::size_t mi = std::min<std::size_t>(4, m - i0);
    for (std::size_t j0 = 0; j0 < n; j0 += kTile) {
      const std::size_t nj = std::min(kTile, n - j0);
      for (std::size_t p = 0; p < k; ++p) {
        const double* b = B + p * n + j0;
        for (std::size_t q = 0; q < mi; ++q) axpy(C + (i0 + q) * n + j0, b, A[(i0 + q) * k + p], nj);
      }
    }
  }
}

// Four independent partial sums so the reduction vectorises without reassociation flags.
inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Scratch reused across calls; large per-call allocations cost page faults.
thread_local std::vector<double> scratch_cols, scratch_out, scratch_grad, scratch_wt;

}  // namespace

Tensor3 conv1d(const Tensor3& x, const Tensor3& weight, const Tensor3& bias) {
  check_conv_shapes(x, weight, bias);
  const std::size_t batch = x.batch(), time = x.time(), cols = batch * time;
  const std::size_t out_ch = weight.batch(), rows = weight.channels() * weight.time();
  im2col(x, weight.time(), scratch_cols);
  std::vector<double>& y = scratch_out;
  y.resize(out_ch * cols);
  for (std::size_t o = 0; o < out_ch; ++o) std::fill_n(y.data() + o * cols, cols, bias.data()[o]);
  gemm_nn(out_ch, cols, rows, weight.data(), scratch_cols.data(), y.data());
  Tensor3 out({batch, out_ch, time});
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t b = 0; b < batch; ++b) std::copy_n(y.data() + o * cols + b * time, time, out.data() + out.index(b, o, 0));
  }
  return out;
}

Var conv1d(Var x, Var weight, Var bias) {
  Tensor3 out = conv1d(x.value(), weight.value(), bias.value());
  const Var ins[] = {x, weight, bias};
  return x.tape().record("conv1d", std::move(out), ins, [x, weight, bias](Tape& tape, Var, const Tensor3& g) {
    const Tensor3& xv = tape.value(x);
    const Tensor3& wv = tape.value(weight);
    const std::size_t batch = xv.batch(), in = xv.channels(), time = xv.time(), cols = batch * time;
    const std::size_t out_ch = wv.batch(), k = wv.time(), rows = in * k;
    double* gx = tape.requires_grad(x) ? tape.grad_buffer(x).data() : nullptr;
    double* gw = tape.requires_grad(weight) ? tape.grad_buffer(weight).data() : nullptr;
    double* gb = tape.requires_grad(bias) ? tape.grad_buffer(bias).data() : nullptr;

    // Output gradient as (out, b * T + t).
    std::vector<double>& gm = scratch_out;
    gm.resize(out_ch * cols);
    for (std::size_t o = 0; o < out_ch; ++o) {
      for (std::size_t b = 0; b < batch; ++b) std::copy_n(g.data() + g.index(b, o, 0), time, gm.data() + o * cols + b * time);
    }
    if (gb != nullptr) {
      for (std::size_t o = 0; o < out_ch; ++o) {
        const double* go = gm.data() + o * cols;
        double acc = 0.0;
        for (std::size_t i = 0; i < cols; ++i) acc += go[i];
        gb[o] += acc;
      }
    }
    if (gw != nullptr) {
      im2col(xv, k, scratch_cols);
      for (std::size_t o = 0; o < out_ch; ++o) {
        for (std::size_t r = 0; r < rows; ++r) {
          gw[o * rows + r] += dot(gm.data() + o * cols, scratch_cols.data() + r * cols, cols);
        }
      }
    }
    if (gx != nullptr) {
      std::vector<double>& wt = scratch_wt;
      wt.resize(rows * out_ch);
      for (std::size_t o = 0; o < out_ch; ++o) {
        for (std::size_t r = 0; r < rows; ++r) wt[r * out_ch + o] = wv.data()[o * rows + r];
      }
      std::vector<double>& gcol = scratch_grad;
      gcol.assign(rows * cols, 0.0);
      gemm_nn(rows, cols, out_ch, wt.data(), gm.data(), gcol.data());
      const auto pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
      const auto T = static_cast<std::ptrdiff_t>(time);
      for (std::size_t c = 0; c < in; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(T, T - shift);
          const double* row = gcol.data() + (c * k + j) * cols;
          for (std::size_t b = 0; b < batch; ++b) {
            double* gxc = gx + xv.index(b, c, 0);
            const double* src = row + b * time;
            for (std::ptrdiff_t t = lo; t < hi; ++t) gxc[t + shift] += src[t];
          }
        }
      }
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor3& xv = x.value();
  const Tensor3& wv = weight.value();
  if (xv.time() != 1 || wv.time() != 1) {
    throw ShapeError(fmt::format("linear: expects feature vectors, got input {} and weight {}", xv.shape().str(),
                                 wv.shape().str()));
  }
  if (xv.channels() != wv.channels()) {
    throw ShapeError(fmt::format("linear: input has {} features, weight {} expects {}", xv.channels(),
                                 wv.shape().str(), wv.channels()));
  }
  const std::size_t batch = xv.batch(), in = wv.channels(), out_f = wv.batch();
  if (bias.valid() && bias.shape() != Shape{1, out_f, 1}) {
    throw ShapeError(fmt::format("linear: bias {} does not match {} outputs", bias.shape().str(), out_f));
  }
  Tensor3 out({batch, out_f, 1});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = xv.data() + xv.index(b, 0, 0);
    for (std::size_t o = 0; o < out_f; ++o) {
      const double* w = wv.data() + o * in;
      double acc = bias.valid() ? bias.value().data()[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xb[i];
      out(b, o, 0) = acc;
    }
  }
  std::vector<Var> ins = {x, weight};
  if (bias.valid()) ins.push_back(bias);
  return x.tape().record("linear", std::move(out), ins, [x, weight, bias](Tape& tape, Var, const Tensor3& g) {
    const Tensor3& xv = tape.value(x);
    const Tensor3& wv = tape.value(weight);
    const std::size_t batch = xv.batch(), in = wv.channels(), out_f = wv.batch();
    double* gx = tape.requires_grad(x) ? tape.grad_buffer(x).data() : nullptr;
    double* gw = tape.requires_grad(weight) ? tape.grad_buffer(weight).data() : nullptr;
    double* gb = bias.valid() && tape.requires_grad(bias) ? tape.grad_buffer(bias).data() : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = xv.data() + b * in;
      for (std::size_t o = 0; o < out_f; ++o) {
        const double go = g.data()[b * out_f + o];
        if (gb != nullptr) gb[o] += go;
        const double* w = wv.data() + o * in;
        if (gw != nullptr) {
          for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += go * xb[i];
        }
        if (gx != nullptr) {
          for (std::size_t i = 0; i < in; ++i) gx[b * in + i] += go * w[i];
        }
      }
    }
  });
}

Var global_avg_pool(Var x) {
  const Tensor3& xv = x.value();
  const std::size_t time = xv.time();
  Tensor3 out({xv.batch(), xv.channels(), 1});
  for (std::size_t b = 0; b < xv.batch(); ++b) {
    for (std::size_t c = 0; c < xv.channels(); ++c) {
      const double* row = xv.data() + xv.index(b, c, 0);
      double acc = 0.0;
      for (std::size_t t = 0; t < time; ++t) acc += row[t];
      out(b, c, 0) = acc / static_cast<double>(time);
    }
  }
  const Var ins[] = {x};
  return x.tape().record("global_avg_pool", std::move(out), ins, [x](Tape& tape, Var, const Tensor3& g) {
    Tensor3& gx = tape.grad_buffer(x);
    const std::size_t time = gx.time();
    const double inv = 1.0 / static_cast<double>(time);
    for (std::size_t b = 0; b < gx.batch(); ++b) {
      for (std::size_t c = 0; c < gx.channels(); ++c) {
        const double share = g(b, c, 0) * inv;
        double* row = gx.data() + gx.index(b, c, 0);
        for (std::size_t t = 0; t < time; ++t) row[t] += share;
      }
    }
  });
}

Var dropout(Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument(fmt::format("dropout probability {} outside [0, 1)", p));
  if (mode == Mode::eval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor3 mask(x.shape());
  for (double& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep_scale;
  Tensor3 out(x.shape());
  const auto xv = x.value().values();
  for (std::size_t i = 0; i < xv.size(); ++i) out.values()[i] = xv[i] * mask.values()[i];
  const Var ins[] = {x};
  return x.tape().record("dropout", std::move(out), ins, [x, mask = std::move(mask)](Tape& tape, Var, const Tensor3& g) {
    auto gx = tape.grad_buffer(x).values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g.values()[i] * mask.values()[i];
  });
}

Tensor3 init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor3 t(shape);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Conv1d::Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, Rng& rng)
    : in_channels(in), out_channels(out), kernel_size(kernel) {
  if (in == 0 || out == 0 || kernel == 0) {
    throw ShapeError(fmt::format("conv1d {}: channels and kernel size must be >= 1", name));
  }
  weight = {name + ".weight", init_uniform({out, in, kernel}, in * kernel, rng)};
  bias = {name + ".bias", init_uniform({1, out, 1}, in * kernel, rng)};
}

Var Conv1d::operator()(Tape& tape, Var x) { return conv1d(x, tape.param(weight), tape.param(bias)); }

void Conv1d::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Dense::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng) : in_features(in), out_features(out) {
  if (in == 0 || out == 0) throw ShapeError(fmt::format("dense {}: feature counts must be >= 1", name));
  weight = {name + ".weight", init_uniform({out, in, 1}, in, rng)};
  bias = {name + ".bias", init_uniform({1, out, 1}, in, rng)};
}

Var Dense::operator()(Tape& tape, Var x) { return linear(x, tape.param(weight), tape.param(bias)); }

void Dense::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LstmCell::LstmCell(std::string name, std::size_t input, std::size_t hidden, Rng& rng)
    : input_size(input), hidden_size(hidden) {
  if (input == 0 || hidden == 0) throw ShapeError(fmt::format("lstm {}: sizes must be >= 1", name));
  // Recurrent and input weights share the fan-in of the concatenated [x, h].
  const std::size_t fan_in = input + hidden;
  auto make = [&](const char* suffix, Shape shape) {
    return Parameter{name + "." + suffix, init_uniform(shape, fan_in, rng)};
  };
  w_gx = make("w_gx", {hidden, input, 1});
  w_gh = make("w_gh", {hidden, hidden, 1});
  w_ix = make("w_ix", {hidden, input, 1});
  w_ih = make("w_ih", {hidden, hidden, 1});
  w_fx = make("w_fx", {hidden, input, 1});
  w_fh = make("w_fh", {hidden, hidden, 1});
  w_ox = make("w_ox", {hidden, input, 1});
  w_oh = make("w_oh", {hidden, hidden, 1});
  b_g = make("b_g", {1, hidden, 1});
  b_i = make("b_i", {1, hidden, 1});
  b_f = make("b_f", {1, hidden, 1});
  b_o = make("b_o", {1, hidden, 1});
}

LstmState LstmCell::step(Tape& tape, Var x, const LstmState& prev) {
  if (x.shape().channels != input_size || x.shape().time != 1) {
    throw ShapeError(fmt::format("lstm step: input {} does not match input size {}", x.shape().str(), input_size));
  }
  if (prev.h.shape() != Shape{x.shape().batch, hidden_size, 1} || prev.s.shape() != prev.h.shape()) {
    throw ShapeError(fmt::format("lstm step: state {} / {} does not match hidden size {}", prev.h.shape().str(),
                                 prev.s.shape().str(), hidden_size));
  }
  auto pre = [&](Parameter& wx, Parameter& wh, Parameter& b) {
    return add(linear(x, tape.param(wx), tape.param(b)), linear(prev.h, tape.param(wh)));
  };
  const Var g = tanh(pre(w_gx, w_gh, b_g));
  const Var i = sigmoid(pre(w_ix, w_ih, b_i));
  const Var f = sigmoid(pre(w_fx, w_fh, b_f));
  const Var o = sigmoid(pre(w_ox, w_oh, b_o));
  const Var s = add(mul(g, i), mul(prev.s, f));
  const Var h = mul(tanh(s), o);
  return {h, s};
}

LstmState LstmCell::initial_state(Tape& tape, std::size_t batch) const {
  return {tape.constant(Tensor3({batch, hidden_size, 1})), tape.constant(Tensor3({batch, hidden_size, 1}))};
}

void LstmCell::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_gx, &w_gh, &w_ix, &w_ih, &w_fx, &w_fh, &w_ox, &w_oh, &b_g, &b_i, &b_f, &b_o}) {
    out.push_back(p);
  }
}

Var lstm_sequence(Tape& tape, LstmCell& cell, Var x, bool reverse) {
  const std::size_t time = x.shape().time;
  LstmState state = cell.initial_state(tape, x.shape().batch);
  std::vector<Var> outputs(time);
  for (std::size_t k = 0; k < time; ++k) {
    const std::size_t t = reverse ? time - 1 - k : k;
    state = cell.step(tape, slice_time(x, t), state);
    outputs[t] = state.h;
  }
  return stack_time(outputs);
}

LstmStack::LstmStack(std::string name, std::size_t input, std::size_t hidden, std::size_t layer_count,
                     bool bidir, Rng& rng)
    : layers(layer_count), bidirectional(bidir) {
  if (layer_count == 0) throw ShapeError("lstm stack needs at least one layer");
  std::size_t in = input;
  forward_cells.reserve(layers);
  if (bidirectional) backward_cells.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    forward_cells.emplace_back(fmt::format("{}.l{}.fwd", name, l), in, hidden, rng);
    if (bidirectional) backward_cells.emplace_back(fmt::format("{}.l{}.bwd", name, l), in, hidden, rng);
    in = bidirectional ? 2 * hidden : hidden;
  }
}

std::size_t LstmStack::output_channels() const {
  const std::size_t hidden = forward_cells.front().hidden_size;
  return bidirectional ? 2 * hidden : hidden;
}

Var LstmStack::operator()(Tape& tape, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Var fwd = lstm_sequence(tape, forward_cells[l], h, false);
    if (bidirectional) {
      const Var parts[] = {fwd, lstm_sequence(tape, backward_cells[l], h, true)};
      h = concat_channels(parts);
    } else {
      h = fwd;
    }
  }
  return h;
}

void LstmStack::collect(std::vector<Parameter*>& out) {
  for (std::size_t l = 0; l < layers; ++l) {
    forward_cells[l].collect(out);
    if (bidirectional) backward_cells[l].collect(out);
  }
}

}  // namespace gres2net
