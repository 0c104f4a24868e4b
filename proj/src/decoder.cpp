// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/decoder.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"

namespace msdnet {

namespace {

void require_same_spatial(Tensor const &a, Tensor const &b, char const *what)
{
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw DimensionError(std::string(what) + ": spatial mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

} // namespace

void DecoderConfig::validate() const
{
  if (blocks_per_stage < 1 || blocks_per_stage > 4) {
    throw ConfigError("decoder: blocks_per_stage must be in 1..4, got " + std::to_string(blocks_per_stage));
  }
  if (base_res <= 0) throw ConfigError("decoder: base resolution must be positive");
  for (Index c : stage_channels) {
    if (c <= 0) throw ConfigError("decoder: stage widths must be positive");
  }
}

ResidualBlock make_residual_block(ModelState &state, std::string const &name, Index in, Index out, std::uint64_t seed)
{
  ResidualBlock b;
  b.conv_a = make_conv(state, name + ".conv_a", {in, out, 3, 1, 1}, seed, true);
  b.norm_a = make_norm(state, name + ".norm_a", out);
  b.conv_b = make_conv(state, name + ".conv_b", {out, out, 3, 1, 1, 1, 0.5}, seed, true);
  b.norm_b = make_norm(state, name + ".norm_b", out);
  if (in != out) b.skip_proj = make_conv(state, name + ".skip", {in, out, 1, 1, 0, 1, 1.0}, seed, true);
  return b;
}

Tensor residual_block_forward(Tensor const &x, ResidualBlock const &block)
{
  if (x.rank() != 3) throw DimensionError("residual block input must be [C,H,W]");
  if (x.dim(0) != block.conv_a.in_channels()) {
    throw DimensionError("residual block expects " + std::to_string(block.conv_a.in_channels()) + " channels, got " +
                         to_string(x.shape()));
  }
  Tensor const branch = block.norm_b(block.conv_b(relu(block.norm_a(block.conv_a(x)))));
  Tensor const skip = block.skip_proj ? (*block.skip_proj)(x) : x;
  return relu(add(branch, skip));
}

Tensor skip_fuse(Tensor const &x, Tensor const &support_feat, ConvLayer const &fuse)
{
  require_same_spatial(x, support_feat, "skip_fuse");
  return fuse(concat({x, support_feat}, 0));
}

Tensor upsample_stage(Tensor const &x, ConvLayer const &up) { return up(bilinear_upsample(x, 2)); }

DecoderParams make_decoder(ModelState          &state,
                           std::string const   &prefix,
                           DecoderConfig const &config,
                           Index                conv5_channels,
                           Index                merged_channels,
                           std::uint64_t        seed)
{
  config.validate();
  auto const   &ch = config.stage_channels;
  DecoderParams p;
  Index const   support_width[3] = {conv5_channels, ch[1], ch[2]};
  for (std::size_t s = 0; s < 3; ++s) {
    std::string const stage = prefix + ".stage" + std::to_string(s + 1);
    for (int b = 0; b < config.blocks_per_stage; ++b) {
      std::string const block = stage + ".block" + std::to_string(b);
      p.stages[s].fuse.push_back(
        make_conv(state, block + ".fuse", {ch[s] + support_width[s], ch[s], 1, 1, 0, 1, 1.0}, seed, true));
      p.stages[s].blocks.push_back(make_residual_block(state, block, ch[s], ch[s], seed));
    }
  }
  p.upsample[0] = make_conv(state, prefix + ".up1", {ch[0], ch[1], 3, 1, 1}, seed, true);
  p.upsample[1] = make_conv(state, prefix + ".up2", {ch[1], ch[2], 3, 1, 1}, seed, true);
  p.support_up2 = make_conv(state, prefix + ".support_up2", {merged_channels, ch[1], 3, 1, 1, 1, 1.0}, seed, true);
  p.support_up4 = make_conv(state, prefix + ".support_up4", {merged_channels, ch[2], 3, 1, 1, 1, 1.0}, seed, true);
  return p;
}

Tensor decoder_forward(Tensor const        &stage1_input,
                       Tensor const        &support_conv5,
                       Tensor const        &support_merged,
                       DecoderParams const &params,
                       DecoderConfig const &config)
{
  Index const r = config.base_res;
  if (stage1_input.rank() != 3 || stage1_input.dim(1) != r || stage1_input.dim(2) != r) {
    throw DimensionError("decoder_forward: stage-1 input must be R x R with R = " + std::to_string(r) + ", got " +
                         to_string(stage1_input.shape()));
  }
  require_same_spatial(stage1_input, support_conv5, "decoder_forward");
  require_same_spatial(stage1_input, support_merged, "decoder_forward");

  Tensor const support[3] = {
    support_conv5,
    params.support_up2(bilinear_upsample(support_merged, 2)),
    params.support_up4(bilinear_upsample(support_merged, 4)),
  };

  Tensor x = stage1_input;
  for (std::size_t s = 0; s < 3; ++s) {
    DecoderStage const &stage = params.stages[s];
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      x = residual_block_forward(skip_fuse(x, support[s], stage.fuse[b]), stage.blocks[b]);
    }
    if (s < 2) x = upsample_stage(x, params.upsample[s]);
  }
  return x;
}

} // namespace msdnet
