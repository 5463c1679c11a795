#include "gres2net/gradcheck.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gres2net/error.hpp"
#include "gres2net/model.hpp"
#include "gres2net/nn.hpp"
#include "gres2net/res2net.hpp"
#include "gres2net/train.hpp"

namespace gres2net {

GradCheckResult check_gradients(const GradCheckCase& c, double step, double tolerance, bool corrupt) {
  std::vector<Tensor3> analytic;
  {
    Tape tape;
    const Var loss = c.loss(tape);
    tape.backward(loss);
    analytic = tape.grads(c.params);
  }
  if (corrupt && !analytic.empty()) analytic[0].values()[0] += 1e-2 * (1.0 + std::abs(analytic[0].values()[0]));

  auto evaluate = [&c] {
    Tape tape;
    return c.loss(tape).value().item();
  };

  GradCheckResult r;
  r.name = c.name;
  double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0, worst_diff = -1.0;
  for (std::size_t p = 0; p < c.params.size(); ++p) {
    auto values = c.params[p]->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = evaluate();
      values[i] = saved - step;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].values()[i];
      const double d = std::abs(a - numeric);
      if (d > worst_diff) {
        worst_diff = d;
        r.worst_param = c.params[p]->name;
      }
      diff_sq += d * d;
      a_sq += a * a;
      n_sq += numeric * numeric;
    }
  }
  r.max_rel_error = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(n_sq), 1e-8});
  r.passed = r.max_rel_error < tolerance;
  return r;
}

const char* to_string(GradScope scope) {
  switch (scope) {
    case GradScope::tensor: return "tensor";
    case GradScope::nn: return "nn";
    case GradScope::res2net: return "res2net";
    case GradScope::train: return "train";
  }
  return "?";
}

GradScope parse_grad_scope(const std::string& text) {
  if (text == "tensor") return GradScope::tensor;
  if (text == "nn") return GradScope::nn;
  if (text == "res2net") return GradScope::res2net;
  if (text == "train") return GradScope::train;
  throw ConfigError(fmt::format("unknown gradcheck scope '{}' (expected tensor, nn, res2net or train)", text));
}

namespace {

Tensor3 random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor3 t(shape);
  for (double& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.below(hi - lo + 1)); }

/// Owns a bag of parameters plus any layer objects a case needs.
struct Bag {
  std::vector<std::unique_ptr<Parameter>> owned;
  std::vector<Parameter*> params;

  Parameter& add(std::string name, Tensor3 value) {
    owned.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(value)}));
    params.push_back(owned.back().get());
    return *owned.back();
  }
};

// Projects an output onto a fixed random tensor so every output element matters.
Var project(Var out, const Tensor3& weights) { return weighted_sum(out, weights); }

GradCheckCase make_case(std::string name, std::shared_ptr<Bag> bag, std::function<Var(Tape&)> loss) {
  GradCheckCase c;
  c.name = std::move(name);
  c.params = bag->params;
  c.loss = std::move(loss);
  c.owner = std::move(bag);
  return c;
}

Shape random_shape(Rng& rng) { return {pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 6)}; }

std::vector<GradCheckCase> tensor_suite(Rng& rng) {
  std::vector<GradCheckCase> cases;
  auto binary = [&](const char* name, Var (*op)(Var, Var)) {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& a = bag->add("a", random_tensor(shape, rng));
    Parameter& b = bag->add("b", random_tensor(shape, rng));
    const Tensor3 w = random_tensor(shape, rng);
    cases.push_back(make_case(name, bag, [&a, &b, w, op](Tape& t) { return project(op(t.param(a), t.param(b)), w); }));
  };
  binary("add", &add);
  binary("sub", &sub);
  binary("mul", &mul);
  auto unary = [&](const char* name, Var (*op)(Var), double scale) {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& a = bag->add("a", random_tensor(shape, rng, scale));
    const Tensor3 w = random_tensor(shape, rng);
    cases.push_back(make_case(name, bag, [&a, w, op](Tape& t) { return project(op(t.param(a)), w); }));
  };
  unary("tanh", &tanh, 2.0);
  unary("sigmoid", &sigmoid, 3.0);
  unary("relu", &relu, 1.0);
  {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& a = bag->add("a", random_tensor(shape, rng));
    const double factor = rng.uniform(-2.0, 2.0);
    cases.push_back(make_case("scale+sum", bag, [&a, factor](Tape& t) { return sum(scale(t.param(a), factor)); }));
  }
  {
    const std::size_t groups = pick(rng, 1, 4);
    const Shape shape{pick(rng, 1, 3), groups * pick(rng, 1, 3), pick(rng, 1, 5)};
    auto bag = std::make_shared<Bag>();
    Parameter& a = bag->add("x", random_tensor(shape, rng));
    const Tensor3 w = random_tensor(shape, rng);
    // Reorder the groups so split and concat gradients are not a trivial identity.
    cases.push_back(make_case("split_channels+concat_channels", bag, [&a, w, groups](Tape& t) {
      std::vector<Var> parts = split_channels(t.param(a), groups);
      std::vector<Var> mixed;
      for (std::size_t i = parts.size(); i-- > 0;) mixed.push_back(mul(parts[i], parts[(i + 1) % parts.size()]));
      return project(concat_channels(mixed), w);
    }));
  }
  {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& a = bag->add("x", random_tensor(shape, rng));
    const Tensor3 w = random_tensor(shape, rng);
    cases.push_back(make_case("slice_time+stack_time", bag, [&a, w](Tape& t) {
      const Var x = t.param(a);
      std::vector<Var> steps;
      for (std::size_t k = x.shape().time; k-- > 0;) steps.push_back(tanh(slice_time(x, k)));
      return project(stack_time(steps), w);
    }));
  }
  return cases;
}

std::vector<GradCheckCase> nn_suite(Rng& rng) {
  std::vector<GradCheckCase> cases;
  {
    const std::size_t batch = pick(rng, 1, 3), in = pick(rng, 1, 4), out = pick(rng, 1, 4);
    const std::size_t k = 2 * pick(rng, 0, 2) + 1, time = pick(rng, 1, 7);
    auto bag = std::make_shared<Bag>();
    Parameter& x = bag->add("x", random_tensor({batch, in, time}, rng));
    Parameter& w = bag->add("weight", random_tensor({out, in, k}, rng));
    Parameter& b = bag->add("bias", random_tensor({1, out, 1}, rng));
    const Tensor3 proj = random_tensor({batch, out, time}, rng);
    cases.push_back(make_case("conv1d", bag, [&x, &w, &b, proj](Tape& t) {
      return project(conv1d(t.param(x), t.param(w), t.param(b)), proj);
    }));
  }
  {
    const std::size_t batch = pick(rng, 1, 4), in = pick(rng, 1, 5), out = pick(rng, 1, 4);
    auto bag = std::make_shared<Bag>();
    Parameter& x = bag->add("x", random_tensor({batch, in, 1}, rng));
    Parameter& w = bag->add("weight", random_tensor({out, in, 1}, rng));
    Parameter& b = bag->add("bias", random_tensor({1, out, 1}, rng));
    const Tensor3 proj = random_tensor({batch, out, 1}, rng);
    cases.push_back(make_case("dense", bag, [&x, &w, &b, proj](Tape& t) {
      return project(linear(t.param(x), t.param(w), t.param(b)), proj);
    }));
  }
  {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& x = bag->add("x", random_tensor(shape, rng));
    const Tensor3 proj = random_tensor({shape.batch, shape.channels, 1}, rng);
    cases.push_back(make_case("global_avg_pool", bag, [&x, proj](Tape& t) {
      return project(global_avg_pool(tanh(t.param(x))), proj);
    }));
  }
  {
    const Shape shape = random_shape(rng);
    auto bag = std::make_shared<Bag>();
    Parameter& x = bag->add("x", random_tensor(shape, rng));
    const Tensor3 proj = random_tensor(shape, rng);
    const std::uint64_t mask_seed = rng.next();
    cases.push_back(make_case("dropout(train)", bag, [&x, proj, mask_seed](Tape& t) {
      Rng mask_rng(mask_seed);  // same mask on every evaluation
      return project(dropout(t.param(x), 0.5, Mode::train, mask_rng), proj);
    }));
  }
  {
    const std::size_t batch = pick(rng, 1, 3), input = pick(rng, 1, 4), hidden = pick(rng, 1, 4);
    struct CellBag : Bag {
      LstmCell cell;
    };
    auto bag = std::make_shared<CellBag>();
    bag->cell = LstmCell("cell", input, hidden, rng);
    bag->cell.collect(bag->params);
    Parameter& x = bag->add("x", random_tensor({batch, input, 1}, rng));
    Parameter& h0 = bag->add("h_prev", random_tensor({batch, hidden, 1}, rng));
    Parameter& s0 = bag->add("s_prev", random_tensor({batch, hidden, 1}, rng));
    const Tensor3 ph = random_tensor({batch, hidden, 1}, rng);
    const Tensor3 ps = random_tensor({batch, hidden, 1}, rng);
    CellBag* raw = bag.get();
    cases.push_back(make_case("lstm_cell_step", bag, [raw, &x, &h0, &s0, ph, ps](Tape& t) {
      const LstmState next = raw->cell.step(t, t.param(x), {t.param(h0), t.param(s0)});
      return add(project(next.h, ph), project(next.s, ps));
    }));
  }
  {
    const std::size_t batch = pick(rng, 1, 2), input = pick(rng, 1, 3), hidden = pick(rng, 1, 3);
    const std::size_t time = pick(rng, 1, 4), layers = pick(rng, 1, 2);
    struct StackBag : Bag {
      LstmStack stack;
    };
    auto bag = std::make_shared<StackBag>();
    bag->stack = LstmStack("lstm", input, hidden, layers, true, rng);
    bag->stack.collect(bag->params);
    Parameter& x = bag->add("x", random_tensor({batch, input, time}, rng));
    const Tensor3 proj = random_tensor({batch, 2 * hidden, time}, rng);
    StackBag* raw = bag.get();
    cases.push_back(make_case("lstm_sequence(bidirectional)", bag, [raw, &x, proj](Tape& t) {
      return project(raw->stack(t, t.param(x)), proj);
    }));
  }
  return cases;
}

BlockConfig random_block(Rng& rng) {
  BlockConfig cfg;
  cfg.in_channels = pick(rng, 1, 3);
  cfg.scales = pick(rng, 2, 4);
  cfg.width = pick(rng, 1, 2);
  cfg.kernel_size = 2 * pick(rng, 0, 1) + 1;
  cfg.gate_channels = pick(rng, 1, 2);
  cfg.out_channels = pick(rng, 1, 3);
  return cfg;
}

std::vector<GradCheckCase> res2net_suite(Rng& rng) {
  std::vector<GradCheckCase> cases;
  struct BlockBag : Bag {
    Block block;
    GateUnit gate;
    Backbone backbone;
  };
  {
    const std::size_t n = pick(rng, 2, 6), w = pick(rng, 1, 3), gc = pick(rng, 1, 3);
    const std::size_t batch = pick(rng, 1, 2), time = pick(rng, 1, 5);
    auto bag = std::make_shared<BlockBag>();
    bag->gate = GateUnit("gate", n, w, gc, rng);
    bag->gate.collect(bag->params);
    Parameter& X = bag->add("X", random_tensor({batch, n, time}, rng));
    Parameter& y = bag->add("y_prev", random_tensor({batch, w, time}, rng));
    Parameter& x = bag->add("x_i", random_tensor({batch, w, time}, rng));
    const Tensor3 proj = random_tensor({batch, w, time}, rng);
    BlockBag* raw = bag.get();
    cases.push_back(make_case("gate_compute", bag, [raw, &X, &y, &x, proj](Tape& t) {
      return project(gate_compute(t, raw->gate, t.param(X), t.param(y), t.param(x)), proj);
    }));
  }
  for (const bool gated : {false, true}) {
    const BlockConfig cfg = random_block(rng);
    const std::size_t batch = pick(rng, 1, 2), time = pick(rng, 1, 5);
    auto bag = std::make_shared<BlockBag>();
    bag->block = Block("block", cfg, rng);
    bag->block.collect(bag->params);
    Parameter& x = bag->add("input", random_tensor({batch, cfg.in_channels, time}, rng));
    const Tensor3 proj = random_tensor({batch, cfg.resolved_out_channels(), time}, rng);
    BlockBag* raw = bag.get();
    cases.push_back(make_case(gated ? "gres2net_block" : "res2net_block", bag,
                              [raw, &x, proj, gated](Tape& t) {
                                const Var in = t.param(x);
                                return project(gated ? gres2net_block_forward(t, raw->block, in)
                                                     : res2net_block_forward(t, raw->block, in),
                                               proj);
                              }));
  }
  {
    BlockConfig first = random_block(rng);
    BlockConfig second = random_block(rng);
    second.in_channels = first.resolved_out_channels();
    const std::size_t batch = pick(rng, 1, 2), time = pick(rng, 1, 4);
    auto bag = std::make_shared<BlockBag>();
    bag->backbone = Backbone("backbone", {first, second}, {true, false}, Activation::none, rng);
    bag->backbone.collect(bag->params);
    Parameter& x = bag->add("input", random_tensor({batch, first.in_channels, time}, rng));
    const Tensor3 proj = random_tensor({batch, second.resolved_out_channels(), time}, rng);
    BlockBag* raw = bag.get();
    cases.push_back(make_case("backbone(gated+ungated)", bag, [raw, &x, proj](Tape& t) {
      return project(raw->backbone.forward(t, t.param(x)), proj);
    }));
  }
  return cases;
}

std::vector<GradCheckCase> train_suite(Rng& rng) {
  std::vector<GradCheckCase> cases;
  {
    const std::size_t batch = pick(rng, 1, 4), classes = pick(rng, 2, 4);
    auto bag = std::make_shared<Bag>();
    Parameter& z = bag->add("logits", random_tensor({batch, classes, 1}, rng, 3.0));
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch; ++b) labels.push_back(static_cast<int>(rng.below(classes)));
    cases.push_back(make_case("cross_entropy_loss", bag,
                              [&z, labels](Tape& t) { return cross_entropy_loss(t.param(z), labels); }));
  }
  {
    const Shape shape{pick(rng, 1, 4), pick(rng, 1, 3), 1};
    auto bag = std::make_shared<Bag>();
    Parameter& p = bag->add("pred", random_tensor(shape, rng));
    const Tensor3 target = random_tensor(shape, rng);
    cases.push_back(make_case("mse_loss", bag, [&p, target](Tape& t) { return mse_loss(t.param(p), target); }));
  }
  {
    ModelSpec spec;
    spec.kind = ModelKind::gres2net;
    spec.task = Task::classification;
    spec.input_channels = pick(rng, 1, 3);
    spec.outputs = pick(rng, 2, 3);
    spec.blocks = ModelSpec::default_blocks(spec.input_channels, 1, pick(rng, 2, 4), pick(rng, 1, 2), 3);
    spec.head_hidden = pick(rng, 2, 4);
    spec.dropout = 0.5;
    struct ModelBag : Bag {
      std::unique_ptr<Model> model;
    };
    auto bag = std::make_shared<ModelBag>();
    bag->model = std::make_unique<Model>(spec, rng.next());
    bag->params = bag->model->parameters();
    const std::size_t batch = pick(rng, 1, 3), time = pick(rng, 2, 5);
    Parameter& x = bag->add("input", random_tensor({batch, spec.input_channels, time}, rng));
    std::vector<int> labels;
    for (std::size_t b = 0; b < batch; ++b) labels.push_back(static_cast<int>(rng.below(spec.outputs)));
    const std::uint64_t mask_seed = rng.next();
    ModelBag* raw = bag.get();
    cases.push_back(make_case("model+cross_entropy(train mode)", bag, [raw, &x, labels, mask_seed](Tape& t) {
      Rng mask_rng(mask_seed);
      return cross_entropy_loss(raw->model->forward(t, t.param(x), Mode::train, mask_rng), labels);
    }));
  }
  return cases;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite(GradScope scope, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 7 + static_cast<std::uint64_t>(scope)));
  switch (scope) {
    case GradScope::tensor: return tensor_suite(rng);
    case GradScope::nn: return nn_suite(rng);
    case GradScope::res2net: return res2net_suite(rng);
    case GradScope::train: return train_suite(rng);
  }
  return {};
}

}  // namespace gres2net
