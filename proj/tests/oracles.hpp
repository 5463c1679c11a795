#pragma once

// Scalar reference implementations. They only read tensor values and never
// call library compute code, so agreement with the library is meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gres2net/res2net.hpp"
#include "gres2net/rng.hpp"
#include "gres2net/tensor.hpp"

namespace oracle {

using Map = std::vector<std::vector<double>>;  // [channel][time], one batch element

inline Map slice(const gres2net::Tensor3& t, std::size_t b) {
  Map m(t.channels(), std::vector<double>(t.time()));
  for (std::size_t c = 0; c < t.channels(); ++c) {
    for (std::size_t s = 0; s < t.time(); ++s) m[c][s] = t(b, c, s);
  }
  return m;
}

inline double max_abs_diff(const Map& a, const gres2net::Tensor3& t, std::size_t b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    for (std::size_t s = 0; s < a[c].size(); ++s) worst = std::max(worst, std::abs(a[c][s] - t(b, c, s)));
  }
  return worst;
}

inline gres2net::Tensor3 random(gres2net::Shape shape, gres2net::Rng& rng, double scale = 1.0) {
  gres2net::Tensor3 t(shape);
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

// Direct convolution: y[o][t] = b[o] + sum_c sum_j w[o][c][j] * x[c][t + j - (k-1)/2],
// with out-of-range inputs read as zero.
inline Map conv(const Map& x, const gres2net::Tensor3& w, const gres2net::Tensor3& bias) {
  const std::size_t out = w.batch(), in = w.channels(), k = w.time(), T = x.front().size();
  const long pad = static_cast<long>((k - 1) / 2);
  Map y(out, std::vector<double>(T, 0.0));
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t t = 0; t < T; ++t) {
      double acc = bias(0, o, 0);
      for (std::size_t c = 0; c < in; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(t) + static_cast<long>(j) - pad;
          if (src >= 0 && src < static_cast<long>(T)) acc += w(o, c, j) * x[c][static_cast<std::size_t>(src)];
        }
      }
      y[o][t] = acc;
    }
  }
  return y;
}

inline Map conv(const Map& x, const gres2net::Conv1d& layer) { return conv(x, layer.weight.value, layer.bias.value); }

inline Map channels(const Map& m, std::size_t from, std::size_t count) {
  return Map(m.begin() + static_cast<long>(from), m.begin() + static_cast<long>(from + count));
}

inline Map gate(const gres2net::GateUnit& g, const Map& X, const Map& y_prev, const Map& x_i) {
  Map joined = conv(X, g.proj_X);
  for (auto& row : conv(y_prev, g.proj_y)) joined.push_back(row);
  for (auto& row : conv(x_i, g.proj_x)) joined.push_back(row);
  Map out = conv(joined, g.fuse);
  for (auto& row : out) {
    for (double& v : row) v = std::tanh(v);
  }
  return out;
}

// Hierarchical residual block written out case by case:
//   y_1 = x_1, y_2 = K_2(x_2), y_i = K_i(x_i + g_i * y_{i-1}) for i > 2,
// where g_i = 1 for the ungated block.
inline Map block(const gres2net::Block& blk, const Map& input, bool gated) {
  const std::size_t s = blk.config.scales, w = blk.config.width;
  const Map X = conv(input, blk.expand);
  std::vector<Map> y(s + 1);
  y[1] = channels(X, 0, w);
  y[2] = conv(channels(X, w, w), blk.group_convs[0]);
  for (std::size_t i = 3; i <= s; ++i) {
    const Map x_i = channels(X, (i - 1) * w, w);
    Map g;
    if (gated) g = gate(blk.gates[i - 3], X, y[i - 1], x_i);
    Map sum = x_i;
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t t = 0; t < sum[c].size(); ++t) sum[c][t] += (gated ? g[c][t] : 1.0) * y[i - 1][c][t];
    }
    y[i] = conv(sum, blk.group_convs[i - 2]);
  }
  Map joined;
  for (std::size_t i = 1; i <= s; ++i) {
    for (auto& row : y[i]) joined.push_back(row);
  }
  return conv(joined, blk.compress);
}

// One LSTM step for a single batch element.
struct LstmOut {
  std::vector<double> g, i, f, o, s, h;
};

inline LstmOut lstm_step(const gres2net::LstmCell& cell, const std::vector<double>& x, const std::vector<double>& h,
                         const std::vector<double>& s_prev) {
  const std::size_t H = cell.hidden_size, I = cell.input_size;
  auto pre = [&](const gres2net::Parameter& wx, const gres2net::Parameter& wh, const gres2net::Parameter& b,
                 std::size_t r) {
    double acc = b.value(0, r, 0);
    for (std::size_t c = 0; c < I; ++c) acc += wx.value(r, c, 0) * x[c];
    for (std::size_t c = 0; c < H; ++c) acc += wh.value(r, c, 0) * h[c];
    return acc;
  };
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  LstmOut out;
  for (std::size_t r = 0; r < H; ++r) {
    out.g.push_back(std::tanh(pre(cell.w_gx, cell.w_gh, cell.b_g, r)));
    out.i.push_back(sig(pre(cell.w_ix, cell.w_ih, cell.b_i, r)));
    out.f.push_back(sig(pre(cell.w_fx, cell.w_fh, cell.b_f, r)));
    out.o.push_back(sig(pre(cell.w_ox, cell.w_oh, cell.b_o, r)));
    out.s.push_back(out.g[r] * out.i[r] + s_prev[r] * out.f[r]);
    out.h.push_back(std::tanh(out.s[r]) * out.o[r]);
  }
  return out;
}

// Mean cross-entropy via log-sum-exp.
inline double cross_entropy(const std::vector<std::vector<double>>& logits, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const double m = *std::max_element(logits[b].begin(), logits[b].end());
    double z = 0.0;
    for (double v : logits[b]) z += std::exp(v - m);
    total += m + std::log(z) - logits[b][static_cast<std::size_t>(labels[b])];
  }
  return total / static_cast<double>(logits.size());
}

// Scalar bias-corrected Adam on one coordinate.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double x, double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    return x - lr * mhat / (std::sqrt(vhat) + 1e-8);
  }
};

}  // namespace oracle
