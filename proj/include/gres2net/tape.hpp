#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gres2net/tensor.hpp"

namespace gres2net {

/// A named learnable array. Layers own their parameters; the tape only
/// references them while a forward/backward pass is in flight.
struct Parameter {
  std::string name;
  Tensor3 value;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor3& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records differentiable operations in execution order and replays them in
/// reverse to accumulate gradients. One tape per forward/backward pass.
class Tape {
 public:
  /// Called with the node itself and its output gradient; adds into input gradients via grad_buffer().
  using BackwardFn = std::function<void(Tape&, Var self, const Tensor3& out_grad)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor3 value);
  /// Leaf whose gradient can be read after backward().
  Var input(Tensor3 value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return the same node.
  Var param(Parameter& p);

  /// Appends an op node. `inputs` decides whether the node needs a gradient at all.
  Var record(std::string_view op, Tensor3 value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor3& value(Var v) const { return nodes_[v.id()].value; }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator of node `v`, zero-initialised on first access.
  Tensor3& grad_buffer(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded op backward in reverse order.
  /// Throws ShapeError unless `loss` is 1x1x1.
  void backward(Var loss);

  /// Gradient of a node after backward(); zero when nothing flowed into it.
  Tensor3 grad(Var v) const;
  /// Gradient of a parameter; exact zero if the parameter did not influence the loss.
  Tensor3 grad(const Parameter& p) const;
  std::vector<Tensor3> grads(std::span<Parameter* const> params) const;

  /// Checks every recorded value for NaN/Inf. Defaults to on in debug builds only.
  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }

  /// Invoked with each node id as backward() visits it.
  void set_backward_observer(std::function<void(std::size_t)> observer) { observer_ = std::move(observer); }

 private:
  struct Node {
    std::string op;
    Tensor3 value;
    Tensor3 grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var push(std::string op, Tensor3 value, bool requires_grad, BackwardFn backward);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::function<void(std::size_t)> observer_;
  bool check_finite_;
};

// Differentiable tensor ops. All operands must live on the same tape.

Var elementwise(ElementwiseOp op, Var a, Var b = {});
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var scale(Var a, double factor);
/// Sum of all elements, as a 1x1x1 scalar.
Var sum(Var a);
/// Sum of the elementwise product with a constant weight tensor, as a scalar.
Var weighted_sum(Var a, const Tensor3& weights);

std::vector<Var> split_channels(Var x, std::size_t groups);
Var concat_channels(std::span<const Var> parts);

/// Single time step `t` as a (batch, channels, 1) tensor.
Var slice_time(Var x, std::size_t t);
/// Stacks (batch, channels, 1) steps along time, in order.
Var stack_time(std::span<const Var> steps);

}  // namespace gres2net
