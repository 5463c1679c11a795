#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gres2net/error.hpp"
#include "gres2net/gradcheck.hpp"
#include "gres2net/tape.hpp"
#include "oracles.hpp"

using namespace gres2net;

TEST(Tensor3, ConstructionValidatesLengthExtentsAndFiniteness) {
  EXPECT_THROW(Tensor3({1, 2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor3(Shape{0, 1, 1}), ShapeError);
  EXPECT_THROW(Tensor3({1, 1, 1}, std::vector<double>{NAN}), NonFiniteError);
  EXPECT_THROW(Tensor3({1, 1, 1}, std::vector<double>{INFINITY}), NonFiniteError);
  const Tensor3 t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t(1, 2, 3), 1.5);
  EXPECT_EQ(t.index(1, 2, 3), 23u);
}

TEST(Tensor3, ItemOnlyForScalars) {
  EXPECT_EQ(Tensor3::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor3({1, 2, 1}).item(), ShapeError);
}

TEST(Elementwise, TanhOfZerosIsZeros) {
  const Tensor3 out = elementwise(ElementwiseOp::tanh, Tensor3({1, 2, 3}));
  EXPECT_EQ(out, Tensor3({1, 2, 3}));
}

TEST(Elementwise, SigmoidOfZeroIsHalf) {
  EXPECT_EQ(elementwise(ElementwiseOp::sigmoid, Tensor3({1, 1, 1})).item(), 0.5);
}

TEST(Elementwise, MulSquares) {
  const Tensor3 a = Tensor3::scalar(2.0);
  EXPECT_EQ(elementwise(ElementwiseOp::mul, a, &a).item(), 4.0);
}

TEST(Elementwise, ShapeMismatchReportsBothShapes) {
  const Tensor3 a({1, 2, 3}), b({1, 3, 2});
  try {
    elementwise(ElementwiseOp::add, a, &b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(a.shape().str()), std::string::npos) << msg;
    EXPECT_NE(msg.find(b.shape().str()), std::string::npos) << msg;
  }
  EXPECT_THROW(elementwise(ElementwiseOp::add, a), ShapeError);  // binary op without b
}

TEST(Elementwise, RangesAndValuesMatchScalarFunctions) {
  Rng rng(3);
  const Tensor3 x = oracle::random({2, 3, 5}, rng, 30.0);
  const Tensor3 th = elementwise(ElementwiseOp::tanh, x);
  const Tensor3 sg = elementwise(ElementwiseOp::sigmoid, x);
  const Tensor3 rl = elementwise(ElementwiseOp::relu, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.values()[i];
    EXPECT_GE(th.values()[i], -1.0);
    EXPECT_LE(th.values()[i], 1.0);
    EXPECT_GE(sg.values()[i], 0.0);
    EXPECT_LE(sg.values()[i], 1.0);
    EXPECT_NEAR(th.values()[i], std::tanh(v), 1e-15);
    EXPECT_NEAR(sg.values()[i], 1.0 / (1.0 + std::exp(-v)), 1e-15);
    EXPECT_EQ(rl.values()[i], v > 0 ? v : 0.0);
  }
}

TEST(SplitChannels, RoundtripIsBitExact) {
  Rng rng(1);
  const Tensor3 x = oracle::random({1, 4, 5}, rng);
  const auto parts = split_channels(x, 2);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].shape(), (Shape{1, 2, 5}));
  EXPECT_EQ(concat_channels(parts), x);
  for (std::size_t s : {1u, 2u, 4u}) EXPECT_EQ(concat_channels(split_channels(x, s)), x);
}

TEST(SplitChannels, SingleGroupIsIdentity) {
  Rng rng(2);
  const Tensor3 x = oracle::random({2, 3, 4}, rng);
  const auto parts = split_channels(x, 1);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], x);
}

TEST(SplitChannels, SlicesMatchIndexArithmetic) {
  Rng rng(4);
  const Tensor3 x = oracle::random({2, 6, 4}, rng);
  const auto parts = split_channels(x, 3);
  ASSERT_EQ(parts.size(), 3u);
  for (std::size_t g = 0; g < 3; ++g) {
    ASSERT_EQ(parts[g].shape(), (Shape{2, 2, 4}));
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(parts[g](b, c, t), x.data()[(b * 6 + g * 2 + c) * 4 + t]);
      }
    }
  }
}

TEST(SplitChannels, RejectsNonDivisibleCount) {
  EXPECT_THROW(split_channels(Tensor3({1, 5, 2}), 2), ShapeError);
  EXPECT_THROW(split_channels(Tensor3({1, 4, 2}), 0), ShapeError);
}

TEST(ConcatChannels, SinglePartIsIdentity) {
  Rng rng(5);
  const std::vector<Tensor3> parts{oracle::random({2, 3, 2}, rng)};
  EXPECT_EQ(concat_channels(parts), parts[0]);
}

TEST(ConcatChannels, UnequalPartsLaidOutByIndex) {
  Rng rng(6);
  const std::vector<Tensor3> parts{oracle::random({2, 1, 3}, rng), oracle::random({2, 3, 3}, rng)};
  const Tensor3 out = concat_channels(parts);
  ASSERT_EQ(out.shape(), (Shape{2, 4, 3}));
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(out.data()[(b * 4 + 0) * 3 + t], parts[0].data()[b * 3 + t]);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.data()[(b * 4 + 1 + c) * 3 + t], parts[1].data()[(b * 3 + c) * 3 + t]);
    }
  }
}

TEST(ConcatChannels, RejectsBatchOrTimeMismatch) {
  EXPECT_THROW(concat_channels(std::vector<Tensor3>{Tensor3({1, 1, 3}), Tensor3({2, 1, 3})}), ShapeError);
  EXPECT_THROW(concat_channels(std::vector<Tensor3>{Tensor3({1, 1, 3}), Tensor3({1, 1, 4})}), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  Tape tape;
  const Var x = tape.input(Tensor3({1, 2, 2}, std::vector<double>{1, -2, 3, 4}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(x), Tensor3({1, 2, 2}, 1.0));
}

TEST(Backward, SquareGivesTwiceX) {
  Tape tape;
  const Var x = tape.input(Tensor3::scalar(3.0));
  tape.backward(sum(mul(x, x)));
  EXPECT_EQ(tape.grad(x).item(), 6.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  const Var x = tape.input(Tensor3({1, 2, 1}));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Backward, UnusedParameterGetsExactZero) {
  Parameter used{"used", Tensor3({1, 2, 1}, 1.0)};
  Parameter unused{"unused", Tensor3({1, 3, 1}, 1.0)};
  Tape tape;
  tape.param(unused);  // on the tape, but not part of the loss
  tape.backward(sum(tanh(tape.param(used))));
  EXPECT_EQ(tape.grad(unused), Tensor3({1, 3, 1}));
  Parameter never{"never", Tensor3({2, 2, 1}, 1.0)};
  EXPECT_EQ(tape.grad(never), Tensor3({2, 2, 1}));
}

TEST(Backward, ReusedParameterAccumulatesAdditively) {
  Parameter p{"p", Tensor3::scalar(2.0)};
  Tape tape;
  const Var a = tape.param(p);
  const Var b = tape.param(p);
  EXPECT_EQ(a.id(), b.id());
  // loss = 3p + p*p -> d/dp = 3 + 2p = 7
  tape.backward(sum(add(scale(a, 3.0), mul(b, b))));
  EXPECT_DOUBLE_EQ(tape.grad(p).item(), 7.0);
}

TEST(Backward, ReplaysInExactReverseOrder) {
  Tape tape;
  const Var x = tape.input(Tensor3({1, 2, 2}, 0.3));
  const Var y = tanh(mul(x, x));
  const Var loss = sum(sigmoid(add(y, x)));
  std::vector<std::size_t> visited;
  tape.set_backward_observer([&](std::size_t id) { visited.push_back(id); });
  tape.backward(loss);
  ASSERT_FALSE(visited.empty());
  EXPECT_EQ(visited.front(), loss.id());
  for (std::size_t i = 1; i < visited.size(); ++i) EXPECT_LT(visited[i], visited[i - 1]);
}

TEST(Backward, GradientIsLinearInTheLoss) {
  Rng rng(8);
  const Tensor3 x0 = oracle::random({2, 3, 4}, rng);
  const Tensor3 w = oracle::random({2, 3, 4}, rng);
  auto grad_of = [&](double a, double b) {
    Tape tape;
    const Var x = tape.input(x0);
    const Var f = weighted_sum(tanh(x), w);
    const Var g = sum(mul(sigmoid(x), x));
    tape.backward(add(scale(f, a), scale(g, b)));
    return tape.grad(x);
  };
  const double a = 1.7, b = -0.4;
  const Tensor3 gf = grad_of(1.0, 0.0), gg = grad_of(0.0, 1.0), combined = grad_of(a, b);
  for (std::size_t i = 0; i < combined.size(); ++i) {
    EXPECT_NEAR(combined.values()[i], a * gf.values()[i] + b * gg.values()[i], 1e-15);
  }
}

TEST(Backward, DeterministicAcrossRuns) {
  Rng rng(9);
  const Tensor3 x0 = oracle::random({3, 4, 5}, rng);
  auto run = [&] {
    Tape tape;
    const Var x = tape.input(x0);
    const auto parts = split_channels(x, 2);
    const Var loss = sum(mul(tanh(parts[0]), relu(parts[1])));
    tape.backward(loss);
    return std::pair{loss.value(), tape.grad(x)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Backward, ConstantsReceiveNoGradientBuffer) {
  Tape tape;
  const Var c = tape.constant(Tensor3::scalar(2.0));
  const Var x = tape.input(Tensor3::scalar(3.0));
  tape.backward(sum(mul(c, x)));
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_EQ(tape.grad(x).item(), 2.0);
}

TEST(Tape, FiniteCheckReportsOverflow) {
  Tape tape;
  tape.set_check_finite(true);
  const Var big = tape.input(Tensor3::scalar(1e200));
  EXPECT_THROW(mul(big, big), NonFiniteError);
}

TEST(Tape, StructuralOpsKeepShapes) {
  Tape tape;
  const Var x = tape.input(Tensor3({2, 3, 4}, 1.0));
  EXPECT_EQ(slice_time(x, 2).shape(), (Shape{2, 3, 1}));
  EXPECT_THROW(slice_time(x, 4), ShapeError);
  const std::vector<Var> steps{slice_time(x, 0), slice_time(x, 3)};
  EXPECT_EQ(stack_time(steps).shape(), (Shape{2, 3, 2}));
}

TEST(GradCheck, TensorOpsAgreeWithFiniteDifferencesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : gradcheck_suite(GradScope::tensor, seed)) {
      const auto r = check_gradients(c);
      EXPECT_TRUE(r.passed) << c.name << " seed " << seed << " rel error " << r.max_rel_error;
    }
  }
}

TEST(GradCheck, CorruptedGradientIsDetected) {
  for (const auto& c : gradcheck_suite(GradScope::tensor, 0)) {
    EXPECT_FALSE(check_gradients(c, 1e-6, 1e-5, true).passed) << c.name;
  }
}
