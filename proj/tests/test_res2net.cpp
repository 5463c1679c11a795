#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "gres2net/error.hpp"
#include "gres2net/gradcheck.hpp"
#include "gres2net/res2net.hpp"
#include "oracles.hpp"

using namespace gres2net;

namespace {

void fill(Parameter& p, double v) { std::fill(p.value.values().begin(), p.value.values().end(), v); }

void zero(Conv1d& c) {
  fill(c.weight, 0.0);
  fill(c.bias, 0.0);
}

// Expand becomes the identity so that input channels map 1:1 onto groups.
Block identity_expand_block(std::size_t s, std::size_t w, Rng& rng) {
  BlockConfig cfg{.in_channels = s * w, .scales = s, .width = w};
  Block blk("b", cfg, rng);
  zero(blk.expand);
  for (std::size_t c = 0; c < s * w; ++c) blk.expand.weight.value(c, c, 0) = 1.0;
  return blk;
}

Tensor3 run(Block& blk, const Tensor3& x, bool gated, BlockOptions opts = {}) {
  Tape tape;
  const Var in = tape.constant(x);
  return (gated ? gres2net_block_forward(tape, blk, in, opts) : res2net_block_forward(tape, blk, in)).value();
}

// Keeps the tape alive so the trace stays readable.
struct Traced {
  std::unique_ptr<Tape> tape = std::make_unique<Tape>();
  BlockTrace trace;
  Tensor3 out;
};

Traced traced(Block& blk, const Tensor3& x, bool gated, BlockOptions opts = {}) {
  Traced r;
  const Var in = r.tape->constant(x);
  r.out = (gated ? gres2net_block_forward(*r.tape, blk, in, opts, &r.trace)
                 : res2net_block_forward(*r.tape, blk, in, &r.trace))
              .value();
  return r;
}

}  // namespace

TEST(BlockConfig, RejectsInvalidShapes) {
  EXPECT_THROW((BlockConfig{.scales = 1}.validate()), ShapeError);
  EXPECT_THROW((BlockConfig{.width = 0}.validate()), ShapeError);
  EXPECT_THROW((BlockConfig{.kernel_size = 2}.validate()), ShapeError);
  EXPECT_THROW((BlockConfig{.in_channels = 0}.validate()), ShapeError);
  EXPECT_NO_THROW((BlockConfig{.in_channels = 3, .scales = 2, .width = 1}.validate()));
}

TEST(Block, ParameterCountsAndShapes) {
  Rng rng(1);
  Block blk("b", BlockConfig{.in_channels = 3, .scales = 4, .width = 2, .kernel_size = 3}, rng);
  EXPECT_EQ(blk.group_convs.size(), 3u);
  EXPECT_EQ(blk.gates.size(), 2u);
  EXPECT_EQ(blk.expand.weight.value.shape(), (Shape{8, 3, 1}));
  EXPECT_EQ(blk.group_convs[0].weight.value.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(blk.compress.weight.value.shape(), (Shape{8, 8, 1}));
  EXPECT_EQ(blk.gates[0].proj_X.weight.value.shape(), (Shape{2, 8, 1}));
  EXPECT_EQ(blk.gates[0].fuse.weight.value.shape(), (Shape{2, 6, 1}));

  Rng r2(2);
  Block two("b", BlockConfig{.in_channels = 3, .scales = 2, .width = 2}, r2);
  EXPECT_TRUE(two.gates.empty());
}

TEST(Block, OutputShapePreservesBatchAndTime) {
  Rng rng(3);
  Block blk("b", BlockConfig{.in_channels = 3, .scales = 3, .width = 2, .out_channels = 5}, rng);
  EXPECT_EQ(run(blk, oracle::random({4, 3, 11}, rng), true).shape(), (Shape{4, 5, 11}));
  EXPECT_EQ(run(blk, oracle::random({4, 3, 11}, rng), false).shape(), (Shape{4, 5, 11}));
  EXPECT_THROW(run(blk, Tensor3({1, 2, 5}), false), ShapeError);
}

TEST(Block, TwoScalesHaveNoResidualPath) {
  Rng rng(4);
  Block blk = identity_expand_block(2, 3, rng);
  Tensor3 x = oracle::random({1, 6, 8}, rng);
  const Traced a = traced(blk, x, true);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < 8; ++t) x(0, c, t) += 1.0;  // perturb x_1 only
  }
  const Traced b = traced(blk, x, true);
  EXPECT_EQ(a.trace.groups[1].value(), b.trace.groups[1].value());
  EXPECT_TRUE(a.trace.gates.empty());
}

TEST(Block, ZeroGroupKernelsLeaveOnlyFirstGroup) {
  Rng rng(5);
  Block blk("b", BlockConfig{.in_channels = 2, .scales = 4, .width = 3}, rng);
  for (auto& k : blk.group_convs) zero(k);
  const Tensor3 x = oracle::random({2, 2, 7}, rng);
  for (bool gated : {false, true}) {
    const Traced r = traced(blk, x, gated);
    for (std::size_t i = 1; i < 4; ++i) EXPECT_EQ(r.trace.groups[i].value(), Tensor3({2, 3, 7}));
    EXPECT_EQ(r.trace.groups[0].value(), split_channels(r.trace.expanded, 4)[0].value());
  }
}

TEST(Block, MatchesCaseByCaseOracle) {
  Rng rng(6);
  for (std::size_t s : {2u, 3u, 4u}) {
    for (std::size_t w : {1u, 2u, 4u}) {
      for (std::size_t k : {1u, 3u}) {
        Block blk("b", BlockConfig{.in_channels = 3, .scales = s, .width = w, .kernel_size = k, .out_channels = 5},
                  rng);
        const Tensor3 x = oracle::random({2, 3, 9}, rng);
        for (bool gated : {false, true}) {
          const Tensor3 out = run(blk, x, gated);
          for (std::size_t n = 0; n < 2; ++n) {
            EXPECT_LT(oracle::max_abs_diff(oracle::block(blk, oracle::slice(x, n), gated), out, n), 1e-12)
                << "s=" << s << " w=" << w << " k=" << k << " gated=" << gated;
          }
        }
      }
    }
  }
}

TEST(Block, UngatedGroupsDependOnlyOnEarlierInputs) {
  Rng rng(7);
  const std::size_t s = 4, w = 2;
  Block blk = identity_expand_block(s, w, rng);
  const Tensor3 x = oracle::random({1, s * w, 6}, rng);
  const Traced base = traced(blk, x, false);
  for (std::size_t j = 0; j < s; ++j) {
    Tensor3 xp = x;
    for (std::size_t c = j * w; c < (j + 1) * w; ++c) xp(0, c, 3) += 0.5;
    const Traced r = traced(blk, xp, false);
    for (std::size_t i = 0; i < j; ++i) {
      EXPECT_EQ(r.trace.groups[i].value(), base.trace.groups[i].value()) << i << " " << j;
    }
    EXPECT_NE(r.trace.groups[j].value(), base.trace.groups[j].value());
  }
}

TEST(Gate, ZeroParametersGiveZeroGate) {
  Rng rng(8);
  GateUnit g("g", 8, 2, 3, rng);
  for (Conv1d* c : {&g.proj_X, &g.proj_y, &g.proj_x, &g.fuse}) zero(*c);
  Tape tape;
  const Var out = gate_compute(tape, g, tape.constant(oracle::random({2, 8, 5}, rng)),
                               tape.constant(oracle::random({2, 2, 5}, rng)),
                               tape.constant(oracle::random({2, 2, 5}, rng)));
  EXPECT_EQ(out.value(), Tensor3({2, 2, 5}));
}

TEST(Gate, SaturatedFuseBiasOpensFully) {
  Rng rng(9);
  Block blk("b", BlockConfig{.in_channels = 3, .scales = 4, .width = 2}, rng);
  for (auto& g : blk.gates) {
    fill(g.fuse.weight, 0.0);
    fill(g.fuse.bias, 50.0);
  }
  const Tensor3 x = oracle::random({2, 3, 6}, rng);
  const Traced r = traced(blk, x, true);
  const Tensor3& gated = r.out;
  for (const Var& g : r.trace.gates) {
    for (double v : g.value().values()) EXPECT_EQ(v, 1.0);
  }
  EXPECT_EQ(gated, run(blk, x, false));
}

TEST(Gate, MatchesOracleAndStaysInOpenInterval) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    GateUnit g("g", 6, 2, 1 + static_cast<std::size_t>(trial % 3), rng);
    const Tensor3 X = oracle::random({2, 6, 5}, rng, 3.0), y = oracle::random({2, 2, 5}, rng, 3.0),
                  xi = oracle::random({2, 2, 5}, rng, 3.0);
    Tape tape;
    const Tensor3 out = gate_compute(tape, g, tape.constant(X), tape.constant(y), tape.constant(xi)).value();
    for (std::size_t n = 0; n < 2; ++n) {
      EXPECT_LT(oracle::max_abs_diff(oracle::gate(g, oracle::slice(X, n), oracle::slice(y, n), oracle::slice(xi, n)),
                                     out, n),
                1e-12);
    }
    for (double v : out.values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Gate, RejectsIncompatibleShapes) {
  Rng rng(11);
  GateUnit g("g", 6, 2, 2, rng);
  Tape tape;
  EXPECT_THROW(gate_compute(tape, g, tape.constant(Tensor3({1, 6, 5})), tape.constant(Tensor3({1, 2, 4})),
                            tape.constant(Tensor3({1, 2, 5}))),
               ShapeError);
}

TEST(Gate, OverrideOneIsBitIdenticalToUngated) {
  Rng rng(12);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t s = 2 + static_cast<std::size_t>(draw % 4), w = 1 + static_cast<std::size_t>(draw % 3);
    Block blk("b", BlockConfig{.in_channels = 2, .scales = s, .width = w, .kernel_size = 3}, rng);
    const Tensor3 x = oracle::random({2, 2, 4 + static_cast<std::size_t>(draw % 5)}, rng);
    ASSERT_EQ(run(blk, x, true, {.gate_override = 1.0}), run(blk, x, false)) << "draw " << draw;
  }
}

TEST(Gate, OverrideZeroSeversHierarchy) {
  Rng rng(13);
  const std::size_t s = 4, w = 2;
  Block blk = identity_expand_block(s, w, rng);
  const Tensor3 x = oracle::random({1, s * w, 7}, rng);
  const Traced r = traced(blk, x, true, {.gate_override = 0.0});
  const oracle::Map xs = oracle::slice(x, 0);
  for (std::size_t i = 1; i < s; ++i) {
    const oracle::Map expect = oracle::conv(oracle::channels(xs, i * w, w), blk.group_convs[i - 1]);
    EXPECT_LT(oracle::max_abs_diff(expect, r.trace.groups[i].value(), 0), 1e-12) << "group " << i + 1;
  }
}

TEST(Backbone, ZeroBlocksIsIdentity) {
  Rng rng(14);
  Backbone bb("bb", {}, {}, Activation::relu, rng);
  const Tensor3 x = oracle::random({2, 3, 5}, rng);
  Tape tape;
  EXPECT_EQ(bb.forward(tape, tape.constant(x)).value(), x);
  EXPECT_EQ(bb.output_channels(3), 3u);
}

TEST(Backbone, SingleBlockEqualsBlockForward) {
  Rng rng(15);
  Backbone bb("bb", {BlockConfig{.in_channels = 3, .scales = 3, .width = 2}}, {true}, Activation::none, rng);
  const Tensor3 x = oracle::random({2, 3, 6}, rng);
  Tape tape;
  EXPECT_EQ(bb.forward(tape, tape.constant(x)).value(), run(bb.blocks[0], x, true));
}

TEST(Backbone, ComposesBlocksWithActivation) {
  Rng rng(16);
  const std::vector<BlockConfig> cfgs{BlockConfig{.in_channels = 3, .scales = 2, .width = 2, .out_channels = 4},
                                      BlockConfig{.in_channels = 4, .scales = 3, .width = 1}};
  Backbone bb("bb", cfgs, {false, true}, Activation::relu, rng);
  EXPECT_EQ(bb.output_channels(3), 3u);
  const Tensor3 x = oracle::random({2, 3, 6}, rng);
  Tape tape;
  const Tensor3 out = bb.forward(tape, tape.constant(x)).value();
  Tensor3 mid = run(bb.blocks[0], x, false);
  for (double& v : mid.values()) v = std::max(v, 0.0);
  Tensor3 expect = run(bb.blocks[1], mid, true);
  for (double& v : expect.values()) v = std::max(v, 0.0);
  EXPECT_EQ(out, expect);
}

TEST(Backbone, RejectsChannelMismatchBetweenBlocks) {
  Rng rng(17);
  const std::vector<BlockConfig> cfgs{BlockConfig{.in_channels = 3, .scales = 2, .width = 2},
                                      BlockConfig{.in_channels = 3, .scales = 2, .width = 2}};
  EXPECT_THROW(Backbone("bb", cfgs, {true, true}, Activation::relu, rng), ShapeError);
  EXPECT_THROW(Backbone("bb", {cfgs[0]}, {true, false}, Activation::relu, rng), ShapeError);
}

TEST(GradCheck, BlocksAgreeWithFiniteDifferencesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : gradcheck_suite(GradScope::res2net, seed)) {
      const auto r = check_gradients(c);
      EXPECT_TRUE(r.passed) << c.name << " seed " << seed << " rel error " << r.max_rel_error;
    }
  }
}
