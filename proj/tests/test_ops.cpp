// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "grad_cases.hpp"
#include "oracles.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/grad_check.hpp"
#include "msdnet/ops.hpp"
#include "msdnet/parameters.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace msdnet;

namespace {

void expect_values(Tensor const &t, std::vector<Scalar> const &want, Scalar tol = 1e-12)
{
  ASSERT_EQ(t.numel(), static_cast<Index>(want.size()));
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t.values()[Index(i)], want[i], tol) << "at " << i;
}

} // namespace

TEST(Tensor, StorageMatchesShape)
{
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24);
  EXPECT_EQ(t.values().size(), 24);
  EXPECT_THROW(Tensor({2, 2}, Vector::Zero(3)), DimensionError);
}

TEST(Tensor, CopiesShareIdentity)
{
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  EXPECT_EQ(a.id(), b.id());
  EXPECT_NE(a.id(), a.detach().id());
}

TEST(Tape, ConstantsAreNotRecorded)
{
  Tape      tape;
  TapeScope scope(tape);
  Tensor    a = Tensor::full({3}, 1.0);
  Tensor    b = relu(add(a, a));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(b.requires_grad());
}

TEST(Tape, NodesFollowTopologicalOrder)
{
  Tape   tape;
  Tensor x = Tensor::from({3}, {1, 2, 3}).set_requires_grad(true);
  {
    TapeScope scope(tape);
    Tensor    y = mul(x, x);
    Tensor    z = add(y, sigmoid(y));
    sum_all(z);
  }
  std::set<std::uint64_t> seen{x.id()};
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (auto in : tape.node(i).inputs) EXPECT_TRUE(seen.count(in)) << tape.node(i).op;
    seen.insert(tape.node(i).output);
  }
}

TEST(Tape, SumOfSquaresGradient)
{
  Tensor    x = Tensor::from({3}, {1, 2, 3}).set_requires_grad(true);
  Tape      tape;
  Tensor    loss;
  {
    TapeScope scope(tape);
    loss = sum_all(mul(x, x));
  }
  expect_values(tape.backward(loss).of(x), {2, 4, 6});
}

TEST(Tape, DetachedParameterGetsZeroGradient)
{
  Tensor    x = Tensor::from({2}, {1, 2}).set_requires_grad(true);
  Tensor    p = Tensor::from({2}, {5, 6}).set_requires_grad(true);
  Tape      tape;
  Tensor    loss;
  {
    TapeScope scope(tape);
    loss = sum_all(add(x, p.detach()));
  }
  expect_values(tape.backward(loss).of(p), {0, 0});
}

TEST(Tape, SharedSubexpressionAccumulates)
{
  Tensor    x = Tensor::from({1}, {3}).set_requires_grad(true);
  Tape      tape;
  Tensor    loss;
  {
    TapeScope scope(tape);
    Tensor    y = scale(x, 2);
    loss = sum_all(mul(y, add(y, x)));
  }
  // loss = 2x (2x + x) = 6x^2
  expect_values(tape.backward(loss).of(x), {36});
}

TEST(Conv2d, ScalarKernelDoubles)
{
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor y = conv2d(x, Tensor::from({1, 1, 1, 1}, {2}), Tensor::from({1}, {0}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  expect_values(y, std::vector<Scalar>(9, 2.0));
}

TEST(Conv2d, HandDotProduct)
{
  Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w = Tensor::from({1, 1, 2, 2}, {1, 0, 0, 1});
  expect_values(conv2d(x, w, Tensor::from({1}, {0})), {5});
}

TEST(Conv2d, BatchedMatchesLoopReference)
{
  SplitMix64 rng(11);
  Tensor     x = oracle::random_tensor({2, 3, 4, 4}, rng);
  Tensor     w = oracle::random_tensor({5, 3, 3, 3}, rng);
  Tensor     b = oracle::random_tensor({5}, rng);
  Tensor     y = conv2d(x, w, b, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4, 4}));
  for (Index n = 0; n < 2; ++n) {
    Tensor xn = reshape(narrow(x, 0, n, 1), {3, 4, 4});
    Tensor yn = reshape(narrow(y, 0, n, 1), {5, 4, 4});
    EXPECT_LT(oracle::max_abs_diff(yn, oracle::conv2d(xn, w, b, 1, 1, 1)), 1e-12);
  }
}

TEST(Conv2d, RandomGeometriesMatchLoopReference)
{
  SplitMix64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    Index const c = oracle::rand_int(rng, 1, 4), k = oracle::rand_int(rng, 1, 4), ks = oracle::rand_int(rng, 1, 3);
    int const   stride = int(oracle::rand_int(rng, 1, 3)), pad = int(oracle::rand_int(rng, 0, 2)),
              dil = int(oracle::rand_int(rng, 1, 3));
    Index const side = dil * (ks - 1) + 1 + oracle::rand_int(rng, 0, 5);
    Tensor      x = oracle::random_tensor({c, side, side}, rng);
    Tensor      w = oracle::random_tensor({k, c, ks, ks}, rng);
    Tensor      b = oracle::random_tensor({k}, rng);
    EXPECT_LT(oracle::max_abs_diff(conv2d(x, w, b, stride, pad, dil), oracle::conv2d(x, w, b, stride, pad, dil)),
              1e-12);
  }
}

TEST(Conv2d, RejectsChannelMismatch)
{
  EXPECT_THROW(conv2d(Tensor::zeros({2, 3, 3}), Tensor::zeros({1, 3, 1, 1}), Tensor()), DimensionError);
  EXPECT_THROW(conv2d(Tensor::zeros({1, 3, 3}), Tensor::zeros({1, 1, 5, 5}), Tensor()), DimensionError);
}

TEST(Matmul, Examples)
{
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  expect_values(matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), m), {1, 2, 3, 4});
  expect_values(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})), {11});
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Matmul, MatchesTripleLoop)
{
  SplitMix64 rng(13);
  Tensor     a = oracle::random_tensor({7, 5}, rng), b = oracle::random_tensor({5, 3}, rng);
  EXPECT_LT(oracle::max_abs_diff(matmul(a, b), oracle::matmul(a, b)), 1e-12);
}

TEST(Softmax, Examples)
{
  expect_values(softmax(Tensor::from({3}, {0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  expect_values(softmax(Tensor::from({2}, {1000, 1000}), 0), {0.5, 0.5});
  expect_values(softmax(Tensor::from({2}, {0, std::log(3.0)}), 0), {0.25, 0.75});
}

TEST(Elementwise, Examples)
{
  EXPECT_EQ(concat({Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1, 3, 2, 2})}, 1).shape(), (Shape{1, 5, 2, 2}));
  expect_values(l2_normalize(Tensor::from({2}, {3, 4}), 0, 0.0), {0.6, 0.8});
  expect_values(relu(Tensor::from({3}, {-1, 0, 2})), {0, 0, 2});
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({4})), DimensionError);
}

TEST(Bilinear, ConstantAndIdentity)
{
  Tensor c = Tensor::full({2, 3, 3}, 5.0);
  expect_values(bilinear_upsample(c, 2), std::vector<Scalar>(2 * 36, 5.0));
  SplitMix64 rng(3);
  Tensor     x = oracle::random_tensor({2, 3, 4}, rng);
  EXPECT_EQ(oracle::max_abs_diff(bilinear_upsample(x, 1), x), 0.0);
}

TEST(Bilinear, RampIsMonotoneAndMatchesOracle)
{
  Tensor x = Tensor::from({1, 2, 2}, {0, 1, 0, 1});
  Tensor y = bilinear_upsample(x, 2);
  EXPECT_LT(oracle::max_abs_diff(y, oracle::bilinear(x, 2)), 1e-12);
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 1; c < 4; ++c) EXPECT_GE(y.at({0, r, c}), y.at({0, r, c - 1}));
  }
  expect_values(narrow(narrow(y, 1, 0, 1), 0, 0, 1), {0, 0.25, 0.75, 1});
}

TEST(Bilinear, RandomMatchesOracle)
{
  SplitMix64 rng(14);
  for (int trial = 0; trial < 25; ++trial) {
    Tensor x = oracle::random_tensor({oracle::rand_int(rng, 1, 3), oracle::rand_int(rng, 1, 6),
                                      oracle::rand_int(rng, 1, 6)},
                                     rng);
    int const s = int(oracle::rand_int(rng, 1, 4));
    EXPECT_LT(oracle::max_abs_diff(bilinear_upsample(x, s), oracle::bilinear(x, s)), 1e-12);
  }
}

TEST(CosineMap, OrthogonalAndParallel)
{
  Tensor f = Tensor::from({2, 1, 3}, {1, -1, 1, 0, 0, 0});
  expect_values(cosine_similarity_map(f, Tensor::from({2}, {1, 1})), {1 / std::sqrt(2.0), -1 / std::sqrt(2.0),
                                                                      1 / std::sqrt(2.0)}, 1e-8);
}

TEST(GradCheck, ReferenceFunctions)
{
  SplitMix64 rng(5);
  Tensor     x = oracle::random_tensor({6}, rng);
  EXPECT_LT(grad_check([](Tensor const &v) { return sum_all(mul(v, v)); }, x), 1e-8);
  EXPECT_LT(grad_check([](Tensor const &v) { return sum_all(sigmoid(v)); }, x), 1e-6);
  Tensor k = grad_cases::kinkless({6}, rng);
  EXPECT_LT(grad_check([](Tensor const &v) { return sum_all(mul(relu(v), v)); }, k), 1e-4);
}

TEST(GradCheck, FlagsAWrongGradient)
{
  // An op whose recorded backward is off by a factor of two must be caught.
  Tensor x = Tensor::from({3}, {0.3, -0.2, 0.9}).set_requires_grad(true);
  auto   f = [&] {
    Tensor out(x.shape(), (x.values().array() * 3).matrix());
    if (detail::tracking({&x})) {
      Tape::active()->record("bad", {x}, out.set_requires_grad(true), [x](Vector const &g, GradientSink &s) {
        s.add(x, g * 6);
      });
    }
    return sum_all(out);
  };
  EXPECT_GT(grad_check_leaves(f, {x}), 0.5);
}

TEST(GradCases, EveryOperatorOnRandomInstances)
{
  SplitMix64 rng(2026);
  for (auto const &c : grad_cases::all()) {
    Scalar worst = 0;
    for (int i = 0; i < 10; ++i) worst = std::max(worst, c.run(rng));
    EXPECT_LT(worst, 1e-4) << c.name;
  }
}

TEST(Parameters, CountHandExample)
{
  ModelState s;
  EXPECT_EQ(param_count(s), 0);
  ConvSpec spec;
  spec.in = 4;
  spec.out = 8;
  spec.kernel = 3;
  make_conv(s, "c", spec, 1, true);
  EXPECT_EQ(param_count(s), 8 * 4 * 3 * 3 + 8);
  make_conv(s, "frozen", spec, 1, false);
  EXPECT_EQ(param_count(s), 296);
  EXPECT_THROW(make_conv(s, "c", spec, 1, true), ArgumentError);
}

TEST(Parameters, InitIsDeterministicPerName)
{
  Tensor a = init_normal({16}, 4, 1.0, 9, "x");
  Tensor b = init_normal({16}, 4, 1.0, 9, "x");
  Tensor c = init_normal({16}, 4, 1.0, 9, "y");
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
}
