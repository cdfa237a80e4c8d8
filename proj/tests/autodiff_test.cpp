/* Copyright 2026 The LEAT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <memory>

#include "leat/autodiff.hpp"
#include "test_util.hpp"

using namespace leat;
using leat::testing::relative_error;

namespace {

TensorPtr shared(Tensor t) { return std::make_shared<const Tensor>(std::move(t)); }

// Dense matmul written independently of the tape path.
std::vector<double> reference_affine(const std::vector<double>& w, std::size_t out,
                                     std::size_t in, const std::vector<double>& x,
                                     const std::vector<double>& b) {
  std::vector<double> y(out);
  for (std::size_t o = 0; o < out; ++o) {
    y[o] = b[o];
    for (std::size_t i = 0; i < in; ++i) y[o] += w[o * in + i] * x[i];
  }
  return y;
}

// Exercises every primitive: affine, activations, reshape, concat, add,
// scale, hadamard, mean, mse, l2_norm.
Var kitchen_sink(Tape& tape, const Var& x, const TensorPtr& w1, const TensorPtr& b1,
                 const TensorPtr& w2) {
  Var h = tanh(forward_affine(flatten(x), w1, b1));
  Var s = sigmoid(forward_affine(h, w2, nullptr));
  Var r = relu(forward_affine(h, w2, nullptr));
  Var joined = concat({s, r, reshape(h, {h.value().numel()})});
  Var prod = hadamard(joined, joined);
  Var target = tape.constant(Tensor(joined.shape(), 0.3));
  return mse_loss(prod, target) + 0.5 * mean(prod) + 0.1 * l2_norm(s + r);
}

}  // namespace

TEST(AutodiffTest, AffineIdentityLike) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 0}));
  Var y = forward_affine(x, shared(Tensor({2, 2}, std::vector<double>{2, 0, 0, 3})),
                         shared(Tensor::vector({0, 0})));
  EXPECT_EQ(y.value(), Tensor::vector({2, 0}));
}

TEST(AutodiffTest, AffineOfZeroInputIsBias) {
  Rng rng(3);
  Tape tape;
  Var x = tape.leaf(Tensor({5}));
  const Tensor b = Tensor::vector({0.1, -0.2, 0.3});
  Var y = forward_affine(x, shared(Tensor::uniform({3, 5}, rng, -1, 1)), shared(b));
  EXPECT_EQ(y.value(), b);
}

TEST(AutodiffTest, AffineMatchesDenseMatmul) {
  Rng rng(11);
  const Tensor w = Tensor::uniform({3, 4}, rng, -1, 1);
  const Tensor b = Tensor::uniform({3}, rng, -1, 1);
  const Tensor x = Tensor::uniform({4}, rng, -1, 1);
  Tape tape;
  Var y = forward_affine(tape.leaf(x), shared(w), shared(b));
  const auto expected = reference_affine(w.data(), 3, 4, x.data(), b.data());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-12);
}

TEST(AutodiffTest, AffineShapeMismatchNamesBothShapes) {
  Tape tape;
  Var x = tape.leaf(Tensor({5}));
  try {
    forward_affine(x, shared(Tensor({3, 4})), shared(Tensor({3})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[5]"), std::string::npos);
    EXPECT_NE(msg.find("[3,4]"), std::string::npos);
  }
  EXPECT_THROW(forward_affine(tape.leaf(Tensor({4})), shared(Tensor({3, 4})),
                              shared(Tensor({2}))),
               DimensionError);
}

TEST(AutodiffTest, Activations) {
  Tape tape;
  EXPECT_EQ(tanh(tape.leaf(Tensor::scalar(0))).value().item(), 0.0);
  EXPECT_EQ(relu(tape.leaf(Tensor::scalar(-1.5))).value().item(), 0.0);
  EXPECT_EQ(sigmoid(tape.leaf(Tensor::scalar(0))).value().item(), 0.5);
}

TEST(AutodiffTest, ReluSubgradientAtZeroIsZero) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({0.0, 1.0, -1.0}));
  Var loss = mean(relu(x));
  const Tensor g = backward(loss, x);
  EXPECT_EQ(g, Tensor::vector({0.0, 1.0 / 3.0, 0.0}));
}

TEST(AutodiffTest, MseLossValues) {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({0.3, -1.2}));
  EXPECT_EQ(mse_loss(a, a).value().item(), 0.0);
  EXPECT_EQ(mse_loss(tape.leaf(Tensor::vector({0, 0})), tape.leaf(Tensor::vector({1, 1})))
                .value()
                .item(),
            1.0);
  EXPECT_THROW(mse_loss(a, tape.leaf(Tensor::vector({1, 2, 3}))), DimensionError);
}

TEST(AutodiffTest, MseMatchesScalarLoop) {
  Rng rng(21);
  const Tensor a = Tensor::uniform({7}, rng, -2, 2);
  const Tensor b = Tensor::uniform({7}, rng, -2, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < 7; ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  Tape tape;
  EXPECT_NEAR(mse_loss(tape.leaf(a), tape.leaf(b)).value().item(), sum / 7.0, 1e-12);
}

TEST(AutodiffTest, BackwardOfSquare) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({2.0}));
  Var loss = mse_loss(x, tape.constant(Tensor::vector({0.0})));
  const Tensor g = backward(loss, x);
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  const Tensor fd = finite_difference_gradient(
      [](const Tensor& t) { return t[0] * t[0]; }, Tensor::vector({2.0}), 1e-5);
  EXPECT_NEAR(fd[0], g[0], 1e-6);
}

TEST(AutodiffTest, BackwardOfConstantIsZero) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var c = tape.constant(Tensor::vector({3.0, 4.0}));
  Var loss = mean(c);
  EXPECT_EQ(backward(loss, x), Tensor({2}));
}

TEST(AutodiffTest, BackwardRejectsForeignValue) {
  Tape tape;
  Tape other;
  Var x = tape.leaf(Tensor::vector({1.0}));
  Var y = other.leaf(Tensor::vector({1.0}));
  Var loss = mean(x);
  EXPECT_THROW(backward(loss, y), LineageError);
  EXPECT_THROW(backward(loss, Var()), LineageError);
  EXPECT_THROW(add(x, y), LineageError);
}

TEST(AutodiffTest, BackwardRequiresScalarLoss) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(backward(tanh(x), x), DimensionError);
}

TEST(AutodiffTest, FiniteDifferenceOfSumOfSquares) {
  auto f = [](const Tensor& t) { return t[0] * t[0] + t[1] * t[1]; };
  const Tensor g = finite_difference_gradient(f, Tensor::vector({1, 2}), 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-6);
  EXPECT_NEAR(g[1], 4.0, 1e-6);
}

TEST(AutodiffTest, FiniteDifferenceOfConstant) {
  const Tensor g =
      finite_difference_gradient([](const Tensor&) { return 3.0; }, Tensor::vector({1, 2, 3}),
                                 1e-5);
  EXPECT_LT(linf_norm(g), 1e-9);
  EXPECT_THROW(finite_difference_gradient([](const Tensor&) { return 0.0; },
                                          Tensor::vector({1}), 0.0),
               ContractError);
}

TEST(AutodiffTest, FiniteDifferenceMatchesMseBackward) {
  Rng rng(5);
  const Tensor target = Tensor::uniform({6}, rng, -1, 1);
  const Tensor x = Tensor::uniform({6}, rng, -1, 1);
  auto fn = [&](Tape& tape, const Var& v) { return mse_loss(v, tape.constant(target)); };
  const auto ad = value_and_gradient(fn, x);
  const Tensor fd = finite_difference_gradient(
      [&](const Tensor& t) { return evaluate(fn, t).item(); }, x, 1e-5);
  EXPECT_LT(relative_error(ad.gradient, fd), 1e-5);
}

// Every primitive against central differences at 20 seeded points.
TEST(AutodiffTest, AllPrimitivesMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, 77));
    const TensorPtr w1 = shared(Tensor::uniform({5, 6}, rng, -1, 1));
    const TensorPtr b1 = shared(Tensor::uniform({5}, rng, -1, 1));
    const TensorPtr w2 = shared(Tensor::uniform({4, 5}, rng, -1, 1));
    const Tensor x = Tensor::uniform({2, 3}, rng, -1, 1);
    auto fn = [&](Tape& tape, const Var& v) { return kitchen_sink(tape, v, w1, b1, w2); };
    const auto ad = value_and_gradient(fn, x);
    const Tensor fd = finite_difference_gradient(
        [&](const Tensor& t) { return evaluate(fn, t).item(); }, x, 1e-5);
    EXPECT_LT(relative_error(ad.gradient, fd), 1e-5) << "seed " << seed;
  }
}

TEST(AutodiffTest, BackwardIsLinearInTheLoss) {
  Rng rng(31);
  const TensorPtr w = shared(Tensor::uniform({4, 6}, rng, -1, 1));
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = Tensor::uniform({6}, rng, -1, 1);
    const double alpha = rng.uniform(-3, 3);
    const double beta = rng.uniform(-3, 3);
    Tape tape;
    Var v = tape.leaf(x);
    Var l1 = mean(tanh(forward_affine(v, w, nullptr)));
    Var l2 = mse_loss(sigmoid(v), tape.constant(Tensor({6}, 0.2)));
    Var combined = alpha * l1 + beta * l2;
    const Tensor expected = alpha * backward(l1, v) + beta * backward(l2, v);
    EXPECT_LT(max_abs_diff(backward(combined, v), expected), 1e-10);
  }
}

TEST(AutodiffTest, TapeIsReusableAndReplayable) {
  Rng rng(41);
  const TensorPtr w1 = shared(Tensor::uniform({5, 6}, rng, -1, 1));
  const TensorPtr b1 = shared(Tensor::uniform({5}, rng, -1, 1));
  const TensorPtr w2 = shared(Tensor::uniform({4, 5}, rng, -1, 1));
  Tape tape;
  Var x = tape.leaf(Tensor::uniform({2, 3}, rng, -1, 1));
  Var loss = kitchen_sink(tape, x, w1, b1, w2);
  const std::size_t size = tape.size();
  const Tensor g1 = backward(loss, x);
  const Tensor g2 = backward(loss, x);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(tape.size(), size);
  EXPECT_TRUE(tape.replay_matches());
}

TEST(AutodiffTest, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(51);
    const TensorPtr w1 = shared(Tensor::uniform({5, 6}, rng, -1, 1));
    const TensorPtr b1 = shared(Tensor::uniform({5}, rng, -1, 1));
    const TensorPtr w2 = shared(Tensor::uniform({4, 5}, rng, -1, 1));
    const Tensor x = Tensor::uniform({2, 3}, rng, -1, 1);
    return value_and_gradient(
        [&](Tape& tape, const Var& v) { return kitchen_sink(tape, v, w1, b1, w2); }, x);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST(AutodiffTest, ReshapeRejectsWrongSize) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 3}));
  EXPECT_THROW(reshape(x, {5}), DimensionError);
  EXPECT_EQ(reshape(x, {3, 2}).shape(), (Shape{3, 2}));
}

TEST(ParameterSetTest, EqualityIsElementwise) {
  ParameterSet a(1), b(1);
  a.add("w", Tensor::vector({1, 2}));
  b.add("w", Tensor::vector({1, 2}));
  EXPECT_EQ(a, b);
  ParameterSet c(1);
  c.add("w", Tensor::vector({1, 3}));
  EXPECT_FALSE(a == c);
  EXPECT_THROW(a.add("w", Tensor::vector({0})), ContractError);
  EXPECT_THROW(a.get("missing"), ContractError);
}
