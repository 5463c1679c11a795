#include "gres2net/tape.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gres2net/error.hpp"

namespace gres2net {

const Tensor3& Var::value() const { return tape_->value(*this); }

Tape::Tape() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Var Tape::push(std::string op, Tensor3 value, bool requires_grad, BackwardFn backward) {
  if (check_finite_) value.check_finite(op);
  nodes_.push_back(Node{std::move(op), std::move(value), Tensor3{}, std::move(backward), requires_grad});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor3 value) { return push("constant", std::move(value), false, nullptr); }

Var Tape::input(Tensor3 value) { return push("input", std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Var v = push("param:" + p.name, p.value, true, nullptr);
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(std::string_view op, Tensor3 value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::logic_error(fmt::format("{}: operand recorded on a different tape", op));
    needs = needs || nodes_[in.id()].requires_grad;
  }
  return push(std::string(op), std::move(value), needs, needs ? std::move(backward) : nullptr);
}

Tensor3& Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id()];
  if (node.grad.empty()) node.grad = Tensor3(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw std::logic_error("backward: loss recorded on a different tape");
  if (value(loss).shape() != Shape{1, 1, 1}) {
    throw ShapeError(fmt::format("backward: loss must be a scalar, got {}", value(loss).shape().str()));
  }
  for (Node& node : nodes_) node.grad = Tensor3{};
  grad_buffer(loss).values()[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    if (observer_) observer_(id);
    // The callback may append to other nodes' grads but never reallocates nodes_.
    node.backward(*this, Var(this, id), node.grad);
  }
}

Tensor3 Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  return node.grad.empty() ? Tensor3(node.value.shape()) : node.grad;
}

Tensor3 Tape::grad(const Parameter& p) const {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return grad(Var(const_cast<Tape*>(this), it->second));
  return Tensor3(p.value.shape());
}

std::vector<Tensor3> Tape::grads(std::span<Parameter* const> params) const {
  std::vector<Tensor3> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(grad(*p));
  return out;
}

namespace {

void accumulate(Tape& tape, Var target, const Tensor3& delta, double factor = 1.0) {
  if (!tape.requires_grad(target)) return;
  auto g = tape.grad_buffer(target).values();
  const auto d = delta.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * d[i];
}

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::logic_error(fmt::format("{}: operands must live on one tape", op));
  }
  return a.tape();
}

}  // namespace

Var elementwise(ElementwiseOp op, Var a, Var b) {
  switch (op) {
    case ElementwiseOp::add: return add(a, b);
    case ElementwiseOp::sub: return sub(a, b);
    case ElementwiseOp::mul: return mul(a, b);
    case ElementwiseOp::tanh: return tanh(a);
    case ElementwiseOp::sigmoid: return sigmoid(a);
    case ElementwiseOp::relu: return relu(a);
  }
  throw std::logic_error("unknown elementwise op");
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  Tensor3 out = elementwise(ElementwiseOp::add, a.value(), &b.value());
  const Var ins[] = {a, b};
  return tape.record("add", std::move(out), ins, [a, b](Tape& t, Var, const Tensor3& g) {
    accumulate(t, a, g);
    accumulate(t, b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "sub");
  Tensor3 out = elementwise(ElementwiseOp::sub, a.value(), &b.value());
  const Var ins[] = {a, b};
  return tape.record("sub", std::move(out), ins, [a, b](Tape& t, Var, const Tensor3& g) {
    accumulate(t, a, g);
    accumulate(t, b, g, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  Tensor3 out = elementwise(ElementwiseOp::mul, a.value(), &b.value());
  const Var ins[] = {a, b};
  return tape.record("mul", std::move(out), ins, [a, b](Tape& t, Var, const Tensor3& g) {
    const auto gv = g.values();
    if (t.requires_grad(a)) {
      auto ga = t.grad_buffer(a).values();
      const auto bv = t.value(b).values();
      for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      auto gb = t.grad_buffer(b).values();
      const auto av = t.value(a).values();
      for (std::size_t i = 0; i < gv.size(); ++i) gb[i] += gv[i] * av[i];
    }
  });
}

namespace {

// Unary op whose derivative is expressed through its input x and output y.
template <typename Deriv>
Var unary(const char* name, ElementwiseOp op, Var a, Deriv deriv) {
  const Var ins[] = {a};
  return a.tape().record(name, elementwise(op, a.value()), ins, [a, deriv](Tape& t, Var self, const Tensor3& g) {
    auto ga = t.grad_buffer(a).values();
    const auto y = t.value(self).values();
    const auto x = t.value(a).values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) ga[i] += gv[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var tanh(Var a) {
  return unary("tanh", ElementwiseOp::tanh, a, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", ElementwiseOp::sigmoid, a, [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary("relu", ElementwiseOp::relu, a, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var scale(Var a, double factor) {
  Tensor3 out(a.shape());
  const auto x = a.value().values();
  auto y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = factor * x[i];
  const Var ins[] = {a};
  return a.tape().record("scale", std::move(out), ins,
                         [a, factor](Tape& t, Var, const Tensor3& g) { accumulate(t, a, g, factor); });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const Var ins[] = {a};
  return a.tape().record("sum", Tensor3::scalar(total), ins, [a](Tape& t, Var, const Tensor3& g) {
    const double seed = g.values()[0];
    for (double& v : t.grad_buffer(a).values()) v += seed;
  });
}

Var weighted_sum(Var a, const Tensor3& weights) {
  require_same_shape(a.value(), weights, "weighted_sum");
  double total = 0.0;
  const auto x = a.value().values();
  const auto w = weights.values();
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * w[i];
  const Var ins[] = {a};
  return a.tape().record("weighted_sum", Tensor3::scalar(total), ins, [a, weights](Tape& t, Var, const Tensor3& g) {
    accumulate(t, a, weights, g.values()[0]);
  });
}

std::vector<Var> split_channels(Var x, std::size_t groups) {
  std::vector<Tensor3> parts = split_channels(x.value(), groups);
  const std::size_t width = x.value().channels() / groups;
  const Var ins[] = {x};
  std::vector<Var> out;
  out.reserve(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    out.push_back(x.tape().record("split_channels", std::move(parts[gi]), ins,
                                  [x, gi, width](Tape& t, Var, const Tensor3& g) {
                                    Tensor3& gx = t.grad_buffer(x);
                                    const std::size_t span = width * g.time();
                                    for (std::size_t b = 0; b < g.batch(); ++b) {
                                      const double* src = g.data() + g.index(b, 0, 0);
                                      double* dst = gx.data() + gx.index(b, gi * width, 0);
                                      for (std::size_t i = 0; i < span; ++i) dst[i] += src[i];
                                    }
                                  }));
  }
  return out;
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
  std::vector<Tensor3> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  Tensor3 out = concat_channels(std::span<const Tensor3>(values));
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].tape().record("concat_channels", std::move(out), ins, [ins](Tape& t, Var, const Tensor3& g) {
    std::size_t offset = 0;
    for (const Var& p : ins) {
      const std::size_t channels = t.value(p).channels();
      if (t.requires_grad(p)) {
        Tensor3& gp = t.grad_buffer(p);
        const std::size_t span = channels * g.time();
        for (std::size_t b = 0; b < g.batch(); ++b) {
          const double* src = g.data() + g.index(b, offset, 0);
          double* dst = gp.data() + gp.index(b, 0, 0);
          for (std::size_t i = 0; i < span; ++i) dst[i] += src[i];
        }
      }
      offset += channels;
    }
  });
}

Var slice_time(Var x, std::size_t t) {
  const Tensor3& xv = x.value();
  if (t >= xv.time()) throw ShapeError(fmt::format("slice_time: step {} outside {}", t, xv.shape().str()));
  Tensor3 out({xv.batch(), xv.channels(), 1});
  for (std::size_t b = 0; b < xv.batch(); ++b) {
    for (std::size_t c = 0; c < xv.channels(); ++c) out(b, c, 0) = xv(b, c, t);
  }
  const Var ins[] = {x};
  return x.tape().record("slice_time", std::move(out), ins, [x, t](Tape& tp, Var, const Tensor3& g) {
    Tensor3& gx = tp.grad_buffer(x);
    for (std::size_t b = 0; b < g.batch(); ++b) {
      for (std::size_t c = 0; c < g.channels(); ++c) gx(b, c, t) += g(b, c, 0);
    }
  });
}

Var stack_time(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("stack_time needs at least one step");
  const Shape first = steps[0].shape();
  for (const Var& s : steps) {
    if (s.shape() != Shape{first.batch, first.channels, 1}) {
      throw ShapeError(fmt::format("stack_time: step shape {} differs from {}x{}x1", s.shape().str(), first.batch,
                                   first.channels));
    }
  }
  Tensor3 out({first.batch, first.channels, steps.size()});
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const Tensor3& sv = steps[t].value();
    for (std::size_t b = 0; b < first.batch; ++b) {
      for (std::size_t c = 0; c < first.channels; ++c) out(b, c, t) = sv(b, c, 0);
    }
  }
  std::vector<Var> ins(steps.begin(), steps.end());
  return steps[0].tape().record("stack_time", std::move(out), ins, [ins](Tape& tp, Var, const Tensor3& g) {
    for (std::size_t t = 0; t < ins.size(); ++t) {
      if (!tp.requires_grad(ins[t])) continue;
      Tensor3& gs = tp.grad_buffer(ins[t]);
      for (std::size_t b = 0; b < g.batch(); ++b) {
        for (std::size_t c = 0; c < g.channels(); ++c) gs(b, c, 0) += g(b, c, t);
      }
    }
  });
}

}  // namespace gres2net
