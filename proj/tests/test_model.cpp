// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include "msdnet/attention.hpp"
#include "msdnet/backbone.hpp"
#include "msdnet/decoder.hpp"
#include "msdnet/errors.hpp"
#include "msdnet/grad_check.hpp"
#include "msdnet/model.hpp"
#include "msdnet/ops.hpp"
#include "msdnet/prototype.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace msdnet;
using oracle::rand_int;
using oracle::random_tensor;

namespace {

void fill(Tensor &t, Scalar v)
{
  for (Index i = 0; i < t.numel(); ++i) t.mutable_values()[i] = v;
}

void zero_conv(ConvLayer &c)
{
  fill(c.weight, 0);
  fill(c.bias, 0);
}

oracle::Linear as_oracle(LinearLayer const &l) { return {l.weight, l.bias}; }

std::map<int, Index> golden_param_counts()
{
  std::ifstream        in(std::string(MSDNET_GOLDEN_DIR) + "/param_counts.txt");
  std::map<int, Index> out;
  std::string          line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int                b;
    Index              n;
    ss >> b >> n;
    out[b] = n;
  }
  return out;
}

} // namespace

TEST(Map, FullMaskIsGlobalAverage)
{
  SplitMix64   rng(1);
  Tensor const f = random_tensor({3, 4, 4}, rng);
  Prototype    p = masked_average_pool(f, Tensor::full({1, 4, 4}, 1.0));
  for (Index c = 0; c < 3; ++c) EXPECT_NEAR(p.vector.values()[c], f.values().segment(c * 16, 16).mean(), 1e-15);
}

TEST(Map, SinglePixelSelectsFeature)
{
  SplitMix64   rng(2);
  Tensor const f = random_tensor({3, 4, 4}, rng);
  Tensor       m = Tensor::zeros({1, 4, 4});
  m.mutable_values()[2 * 4 + 1] = 1;
  Prototype p = masked_average_pool(f, m);
  for (Index c = 0; c < 3; ++c) EXPECT_EQ(p.vector.values()[c], f.at({c, 2, 1}));
}

TEST(Map, TwoChannelHandCase)
{
  Tensor const f = Tensor::from({2, 2, 2}, {1, 2, 3, 4, 0, 0, 0, 8});
  Tensor const m = Tensor::from({1, 2, 2}, {0, 1, 0, 1});
  Prototype    p = masked_average_pool(f, m);
  EXPECT_EQ(p.vector.values()[0], 3.0);
  EXPECT_EQ(p.vector.values()[1], 4.0);
  EXPECT_EQ(p.empty_masks, 0);
}

TEST(Map, EmptyMaskGivesZeroAndFlag)
{
  SplitMix64 rng(3);
  Prototype  p = masked_average_pool(random_tensor({4, 3, 3}, rng), Tensor::zeros({1, 3, 3}));
  EXPECT_EQ(p.vector.values().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(p.empty_masks, 1);
}

TEST(Map, MatchesOracleAndProperties)
{
  SplitMix64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Index const c = rand_int(rng, 1, 6), r = rand_int(rng, 1, 6);
    Tensor      f = random_tensor({c, r, r}, rng, -3, 3);
    Tensor      m = oracle::random_mask(r, r, rng, 0.4);
    auto const  want = oracle::map_pool(f, m);
    Prototype   p = masked_average_pool(f, m);
    for (Index i = 0; i < c; ++i) EXPECT_NEAR(p.vector.values()[i], want[std::size_t(i)], 1e-12);

    Scalar const alpha = rng.uniform(-2, 2);
    Prototype    scaled = masked_average_pool(scale(f, alpha), m);
    EXPECT_LT((scaled.vector.values() - alpha * p.vector.values()).cwiseAbs().maxCoeff(), 1e-12);

    Tensor moved = f.detach();
    for (Index k = 0; k < r * r; ++k) {
      if (m.values()[k] == 0) moved.mutable_values()[rand_int(rng, 0, c - 1) * r * r + k] += 10;
    }
    EXPECT_EQ(masked_average_pool(moved, m).vector.values(), p.vector.values());
  }
}

TEST(Prototypes, Aggregation)
{
  Prototype a{Tensor::from({2}, {1, 1})}, b{Tensor::from({2}, {3, 5})};
  std::vector<Prototype> two{a, b};
  Prototype              mean = aggregate_prototypes(two);
  EXPECT_EQ(mean.vector.values()[0], 2.0);
  EXPECT_EQ(mean.vector.values()[1], 3.0);
  EXPECT_EQ(mean.shot_count, 2);

  std::vector<Prototype> one{b};
  EXPECT_EQ(aggregate_prototypes(one).vector.values(), b.vector.values());
  std::vector<Prototype> opposite{b, Prototype{scale(b.vector, -1)}};
  EXPECT_EQ(aggregate_prototypes(opposite).vector.values().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(aggregate_prototypes({}), ArgumentError);
}

TEST(Cmgm, HandCases)
{
  Prototype p{Tensor::from({2}, {1, 1})};
  Tensor    q = Tensor::from({2, 1, 3}, {1, -1, 1, 1, -1, 0});
  PriorMap  m = cmgm_similarity(q, p);
  EXPECT_NEAR(m.map.values()[0], 1.0, 1e-6);
  EXPECT_NEAR(m.map.values()[1], -1.0, 1e-6);
  EXPECT_NEAR(m.map.values()[2], 1 / std::sqrt(2.0), 1e-6);
}

TEST(Cmgm, ScaleInvariantAndBounded)
{
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Index const c = rand_int(rng, 1, 5), r = rand_int(rng, 1, 5);
    Tensor      q = random_tensor({c, r, r}, rng, -5, 5);
    Prototype   p{random_tensor({c}, rng, -5, 5)};
    PriorMap    base = cmgm_similarity(q, p);
    EXPECT_LE(base.map.values().maxCoeff(), 1.0);
    EXPECT_GE(base.map.values().minCoeff(), -1.0);

    // The eps guard shifts the cosine by about eps / (|q||p|); keep every
    // norm product above 16 so that shift stays under 1e-9.
    for (Index i = 0; i < q.numel(); ++i) q.mutable_values()[i] = (q.values()[i] < 0 ? -4 : 4) + q.values()[i] / 5;
    for (Index i = 0; i < c; ++i) p.vector.mutable_values()[i] = (p.vector.values()[i] < 0 ? -4 : 4) + p.vector.values()[i] / 5;
    base = cmgm_similarity(q, p);
    Scalar const a = rng.uniform(1, 10), b = rng.uniform(1, 10);
    PriorMap     scaled = cmgm_similarity(scale(q, a), Prototype{scale(p.vector, b)});
    EXPECT_LT((scaled.map.values() - base.map.values()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Cmgm, PriorAggregation)
{
  std::vector<PriorMap> maps{PriorMap{Tensor::full({1, 2, 2}, 0.2)}, PriorMap{Tensor::full({1, 2, 2}, 0.6)}};
  PriorMap              m = aggregate_priors(maps);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(m.map.values()[i], 0.4, 1e-15);
  std::vector<PriorMap> one{maps[0]};
  EXPECT_EQ(aggregate_priors(one).map.values(), maps[0].map.values());
  EXPECT_THROW(aggregate_priors({}), ArgumentError);
}

TEST(Fuse, ShapeAndZeroWeights)
{
  SplitMix64 rng(6);
  ModelState st;
  ConvLayer  fuse = make_conv(st, "fuse", {2 * 3 + 1, 3, 1}, 1, true);
  Tensor     q = random_tensor({3, 4, 4}, rng);
  PriorMap   prior = cmgm_similarity(q, Prototype{random_tensor({3}, rng)});
  Prototype  proto{random_tensor({3}, rng)};
  Tensor     out = fuse_stage1_input(q, &prior, proto, fuse);
  EXPECT_EQ(out.shape(), (Shape{3, 4, 4}));
  zero_conv(fuse);
  EXPECT_EQ(fuse_stage1_input(q, &prior, proto, fuse).values().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(fuse_stage1_input(q, nullptr, proto, fuse), DimensionError);
}

TEST(Attention, IdenticalTokensAttendUniformly)
{
  SplitMix64 rng(7);
  ModelState st;
  Index const d = 8;
  auto        wq = make_linear(st, "q", d, d, 1), wk = make_linear(st, "k", d, d, 2);
  auto        wv = make_linear(st, "v", d, d, 3), wo = make_linear(st, "o", d, d, 4);
  Tensor      tok = random_tensor({1, d}, rng);
  Tensor      tokens = expand(tok, {5, d});
  AttentionTrace trace;
  Tensor         out = cross_attention(random_tensor({1, d}, rng), tokens, wq, wk, wv, wo, 2, &trace);
  Tensor         want = wo(wv(tok));
  EXPECT_LT(oracle::max_abs_diff(out, want), 1e-12);
  for (auto const &w : trace.weights) {
    for (Index t = 0; t < 5; ++t) EXPECT_NEAR(w.values()[t], 0.2, 1e-12);
  }
}

TEST(Attention, MatchesPerHeadOracle)
{
  SplitMix64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    Index const heads = rand_int(rng, 1, 3), d = heads * rand_int(rng, 1, 3), t = rand_int(rng, 1, 9);
    ModelState  st;
    auto        wq = make_linear(st, "q", d, d, rng()), wk = make_linear(st, "k", d, d, rng());
    auto        wv = make_linear(st, "v", d, d, rng()), wo = make_linear(st, "o", d, d, rng());
    Tensor      q = random_tensor({1, d}, rng), tokens = random_tensor({t, d}, rng);
    AttentionTrace                   trace;
    Tensor                           out = cross_attention(q, tokens, wq, wk, wv, wo, heads, &trace);
    std::vector<std::vector<Scalar>> weights;
    auto const want = oracle::attention(oracle::row(q, 0), tokens, as_oracle(wq), as_oracle(wk), as_oracle(wv),
                                        as_oracle(wo), heads, &weights);
    for (Index j = 0; j < d; ++j) EXPECT_NEAR(out.values()[j], want[std::size_t(j)], 1e-12);
    ASSERT_EQ(trace.weights.size(), std::size_t(heads));
    for (Index h = 0; h < heads; ++h) {
      EXPECT_NEAR(trace.weights[std::size_t(h)].values().sum(), 1.0, 1e-9);
      for (Index k = 0; k < t; ++k) {
        EXPECT_NEAR(trace.weights[std::size_t(h)].values()[k], weights[std::size_t(h)][std::size_t(k)], 1e-12);
      }
    }
  }
}

TEST(Attention, BlockDiagonalHeadsActIndependently)
{
  // d=4, two heads, block-diagonal projections with identical 2x2 blocks and
  // identity output: each half of the output is single-head attention over
  // that half of the tokens, so tokens with equal halves give equal halves.
  SplitMix64 rng(9);
  ModelState st;
  auto       block = [&](std::string const &name) {
    LinearLayer l = make_linear(st, name, 4, 4, rng());
    Tensor      b2 = random_tensor({2, 2}, rng);
    fill(l.weight, 0);
    fill(l.bias, 0);
    for (Index i = 0; i < 2; ++i) {
      for (Index j = 0; j < 2; ++j) {
        l.weight.mutable_values()[i * 4 + j] = b2.at({i, j});
        l.weight.mutable_values()[(i + 2) * 4 + j + 2] = b2.at({i, j});
      }
    }
    return l;
  };
  LinearLayer wq = block("q"), wk = block("k"), wv = block("v");
  LinearLayer wo = make_linear(st, "o", 4, 4, 1);
  fill(wo.weight, 0);
  fill(wo.bias, 0);
  for (Index i = 0; i < 4; ++i) wo.weight.mutable_values()[i * 4 + i] = 1;

  Tensor tokens({4, 4});
  for (Index t = 0; t < 4; ++t) {
    for (Index j = 0; j < 2; ++j) {
      Scalar const v = rng.uniform(-1, 1);
      tokens.mutable_values()[t * 4 + j] = v;
      tokens.mutable_values()[t * 4 + j + 2] = v;
    }
  }
  Tensor q = Tensor::from({1, 4}, {0.3, -0.7, 0.3, -0.7});
  Tensor out = cross_attention(q, tokens, wq, wk, wv, wo, 2);
  EXPECT_NEAR(out.values()[0], out.values()[2], 1e-14);
  EXPECT_NEAR(out.values()[1], out.values()[3], 1e-14);

  // Hand single-head reference on the first half with head width 2.
  std::vector<Scalar> logits(4);
  Scalar              z = 0;
  auto                proj = [](Tensor const &w, Scalar a, Scalar b, Index j) { return a * w.at({0, j}) + b * w.at({1, j}); };
  Scalar const        qa = proj(wq.weight, 0.3, -0.7, 0), qb = proj(wq.weight, 0.3, -0.7, 1);
  for (Index t = 0; t < 4; ++t) {
    Scalar const x0 = tokens.at({t, 0}), x1 = tokens.at({t, 1});
    logits[std::size_t(t)] = std::exp((qa * proj(wk.weight, x0, x1, 0) + qb * proj(wk.weight, x0, x1, 1)) / std::sqrt(2.0));
    z += logits[std::size_t(t)];
  }
  Scalar o0 = 0, o1 = 0;
  for (Index t = 0; t < 4; ++t) {
    Scalar const x0 = tokens.at({t, 0}), x1 = tokens.at({t, 1});
    o0 += logits[std::size_t(t)] / z * proj(wv.weight, x0, x1, 0);
    o1 += logits[std::size_t(t)] / z * proj(wv.weight, x0, x1, 1);
  }
  EXPECT_NEAR(out.values()[0], o0, 1e-12);
  EXPECT_NEAR(out.values()[1], o1, 1e-12);
}

TEST(Std, UnitLengthAndPermutationInvariant)
{
  SplitMix64 rng(10);
  ModelState st;
  StdConfig  cfg;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.out_dim = 4;
  StdParams p = make_std(st, "std", cfg, 6, 3);
  ASSERT_TRUE(p.input_proj.has_value());
  Tensor        feats = random_tensor({6, 3, 3}, rng);
  Prototype     proto{random_tensor({6}, rng)};
  MaskEmbedding e = std_forward(proto, feats, p, cfg);
  EXPECT_NEAR(e.vector.values().norm(), 1.0, 1e-12);

  std::vector<Index> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(3));
  Tensor shuffled({6, 3, 3});
  for (Index c = 0; c < 6; ++c) {
    for (Index k = 0; k < 9; ++k) shuffled.mutable_values()[c * 9 + k] = feats.values()[c * 9 + perm[std::size_t(k)]];
  }
  EXPECT_LT((std_forward(proto, shuffled, p, cfg).vector.values() - e.vector.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Std, WidthMismatchWithoutProjection)
{
  ModelState st;
  StdConfig  cfg;
  cfg.model_dim = 8;
  cfg.heads = 2;
  cfg.out_dim = 4;
  StdParams p = make_std(st, "std", cfg, 8, 3);
  EXPECT_FALSE(p.input_proj.has_value());
  EXPECT_THROW(std_forward(Prototype{Tensor::zeros({6})}, Tensor::zeros({6, 2, 2}), p, cfg), DimensionError);
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(MergeDot, HandCases)
{
  SplitMix64 rng(11);
  Tensor     map = random_tensor({3, 2, 2}, rng);
  Tensor     onehot = merge_dot_product(map, MaskEmbedding{Tensor::from({3}, {0, 1, 0})});
  for (Index k = 0; k < 4; ++k) EXPECT_EQ(onehot.values()[k], map.values()[4 + k]);
  EXPECT_EQ(merge_dot_product(map, MaskEmbedding{Tensor::zeros({3})}).values().cwiseAbs().maxCoeff(), 0.0);
  Tensor px = merge_dot_product(Tensor::from({2, 1, 1}, {3, -1}), MaskEmbedding{Tensor::from({2}, {2, 5})});
  EXPECT_EQ(px.item(), 1.0);
  EXPECT_EQ(onehot.shape(), (Shape{1, 2, 2}));
}

TEST(MergeDot, Bilinear)
{
  SplitMix64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Index const  c = rand_int(rng, 1, 5), h = rand_int(rng, 1, 4);
    Tensor       a = random_tensor({c, h, h}, rng), b = random_tensor({c, h, h}, rng);
    Tensor       e = random_tensor({c}, rng), f = random_tensor({c}, rng);
    Scalar const s = rng.uniform(-2, 2);
    Tensor       lhs = merge_dot_product(add(a, scale(b, s)), MaskEmbedding{e});
    Tensor rhs = add(merge_dot_product(a, MaskEmbedding{e}), scale(merge_dot_product(b, MaskEmbedding{e}), s));
    EXPECT_LT(oracle::max_abs_diff(lhs, rhs), 1e-12);
    lhs = merge_dot_product(a, MaskEmbedding{add(e, scale(f, s))});
    rhs = add(merge_dot_product(a, MaskEmbedding{e}), scale(merge_dot_product(a, MaskEmbedding{f}), s));
    EXPECT_LT(oracle::max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(Decoder, ZeroResidualBranchIsRelu)
{
  SplitMix64    rng(13);
  ModelState    st;
  ResidualBlock b = make_residual_block(st, "b", 4, 4, 1);
  zero_conv(b.conv_a);
  zero_conv(b.conv_b);
  Tensor x = random_tensor({4, 5, 5}, rng);
  EXPECT_EQ(residual_block_forward(x, b).values(), relu(x).values());
}

TEST(Decoder, BlocksKeepSpatialSize)
{
  SplitMix64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    ModelState    st;
    Index const   in = rand_int(rng, 1, 4), out = rand_int(rng, 1, 4), h = rand_int(rng, 1, 7);
    ResidualBlock b = make_residual_block(st, "b", in, out, rng());
    EXPECT_EQ(b.skip_proj.has_value(), in != out);
    EXPECT_EQ(residual_block_forward(random_tensor({in, h, h + 1}, rng), b).shape(), (Shape{out, h, h + 1}));
  }
}

TEST(Decoder, SkipFusePassThroughAndSupportFlow)
{
  SplitMix64 rng(15);
  ModelState st;
  ConvLayer  fuse = make_conv(st, "fuse", {5, 3, 1}, 2, true);
  Tensor     x = random_tensor({3, 4, 4}, rng), s = random_tensor({2, 4, 4}, rng);
  EXPECT_EQ(skip_fuse(x, s, fuse).shape(), (Shape{3, 4, 4}));

  fill(fuse.bias, 0);
  fill(fuse.weight, 0);
  for (Index i = 0; i < 3; ++i) fuse.weight.mutable_values()[i * 5 + i] = 1;
  EXPECT_EQ(skip_fuse(x, s, fuse).values(), x.values());

  ConvLayer generic = make_conv(st, "generic", {5, 3, 1}, 3, true);
  Tensor    sl = s.detach().set_requires_grad(true);
  Tape      tape;
  Tensor    loss;
  {
    TapeScope scope(tape);
    loss = sum_all(skip_fuse(x, sl, generic));
  }
  EXPECT_GT(tape.backward(loss).of(sl).values().cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Decoder, UpsampleDoublesAndKeepsConstants)
{
  ModelState st;
  ConvLayer  up = make_conv(st, "up", {2, 3, 3, 1, 1}, 1, true);
  fill(up.bias, 0);
  fill(up.weight, 1.0 / 18);
  Tensor out = upsample_stage(Tensor::full({2, 3, 3}, 0.7), up);
  EXPECT_EQ(out.shape(), (Shape{3, 6, 6}));
  for (Index c = 0; c < 3; ++c) {
    for (Index i = 1; i < 5; ++i) {
      for (Index j = 1; j < 5; ++j) EXPECT_NEAR(out.at({c, i, j}), 0.7, 1e-14);
    }
  }
}

TEST(Decoder, ReferenceShapesAndSupportSensitivity)
{
  SplitMix64    rng(16);
  ModelState    st;
  DecoderConfig cfg;
  DecoderParams p = make_decoder(st, "decoder", cfg, 64, 64, 1);
  for (auto const &stage : p.stages) EXPECT_EQ(stage.blocks.size(), 3u);
  Tensor x = random_tensor({64, 8, 8}, rng), c5 = random_tensor({64, 8, 8}, rng, 0, 1);
  Tensor m = random_tensor({64, 8, 8}, rng, 0, 1);
  Tensor out = decoder_forward(x, c5, m, p, cfg);
  EXPECT_EQ(out.shape(), (Shape{32, 32, 32}));
  Tensor c5b = c5.detach();
  c5b.mutable_values()[17] += 1;
  EXPECT_GT(oracle::max_abs_diff(decoder_forward(x, c5b, m, p, cfg), out), 1e-9);
  EXPECT_THROW(decoder_forward(random_tensor({64, 4, 4}, rng), c5, m, p, cfg), DimensionError);

  DecoderConfig two = cfg;
  two.blocks_per_stage = 2;
  ModelState    st2;
  DecoderParams p2 = make_decoder(st2, "decoder", two, 64, 64, 1);
  for (auto const &stage : p2.stages) EXPECT_EQ(stage.blocks.size(), 2u);
}

TEST(Model, ParamCountsMatchGolden)
{
  auto const golden = golden_param_counts();
  ASSERT_EQ(golden.size(), 4u);
  Index prev = 0;
  for (auto const &[b, want] : golden) {
    ModelConfig cfg;
    cfg.decoder.blocks_per_stage = b;
    MsdNet net(cfg);
    EXPECT_EQ(param_count(net.state()), want) << "blocks " << b;
    EXPECT_GT(want, prev);
    prev = want;
  }
}

TEST(Model, BackboneShapesAndFreezing)
{
  SplitMix64 rng(17);
  MsdNet     net{ModelConfig{}};
  auto const f = net.features(random_tensor({3, 64, 64}, rng, 0, 1));
  EXPECT_EQ(f.conv3.shape(), (Shape{32, 8, 8}));
  EXPECT_EQ(f.conv4.shape(), (Shape{48, 8, 8}));
  EXPECT_EQ(f.conv5.shape(), (Shape{64, 8, 8}));
  EXPECT_FALSE(f.conv5.requires_grad());
  for (auto const &[name, t] : net.state().tensors()) {
    if (name.rfind("backbone.", 0) == 0) EXPECT_FALSE(t.requires_grad()) << name;
  }
  EXPECT_THROW(net.features(random_tensor({3, 32, 32}, rng)), DimensionError);
}

TEST(Model, InitIsDeterministic)
{
  ModelConfig cfg;
  MsdNet      a(cfg), b(cfg);
  for (auto const &[name, t] : a.state().tensors()) EXPECT_EQ(t.values(), b.state().get(name).values()) << name;
  cfg.seed = 43;
  MsdNet c(cfg);
  EXPECT_NE(a.state().get("fuse.weight").values(), c.state().get("fuse.weight").values());
}

TEST(Model, ForwardShapesForEveryAblation)
{
  SplitMix64 rng(18);
  for (int bits = 0; bits < 8; ++bits) {
    ModelConfig cfg;
    cfg.ablation = {bool(bits & 1), bool(bits & 2), bool(bits & 4)};
    MsdNet                     net(cfg);
    std::vector<FeatureBundle> sup{net.features(random_tensor({3, 64, 64}, rng, 0, 1))};
    std::vector<Tensor>        masks{oracle::random_mask(64, 64, rng)};
    auto const                 q = net.features(random_tensor({3, 64, 64}, rng, 0, 1));
    ModelOutput                out = net.forward(sup, masks, q);
    EXPECT_EQ(out.logits.shape(), (Shape{1, 64, 64})) << bits;
    EXPECT_TRUE(out.logits.values().allFinite());
  }
}

TEST(Model, RepeatedShotsMatchOneShot)
{
  SplitMix64 rng(19);
  MsdNet     net{ModelConfig{}};
  auto const s = net.features(random_tensor({3, 64, 64}, rng, 0, 1));
  auto const q = net.features(random_tensor({3, 64, 64}, rng, 0, 1));
  Tensor     m = oracle::random_mask(64, 64, rng);
  std::vector<FeatureBundle> one{s}, five(5, s);
  std::vector<Tensor>        m1{m}, m5(5, m);
  Tensor const               a = net.forward(one, m1, q).logits, b = net.forward(five, m5, q).logits;
  EXPECT_LT(oracle::max_abs_diff(a, b), 1e-12);
  EXPECT_THROW(net.forward(one, m5, q), ArgumentError);
}
