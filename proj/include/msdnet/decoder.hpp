// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"
#include "msdnet/tensor.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msdnet {

struct DecoderConfig
{
  std::array<Index, 3> stage_channels{64, 48, 32};
  int                  blocks_per_stage = 3;
  Index                base_res = 8;

  void validate() const;
};

struct ResidualBlock
{
  ConvLayer                conv_a;
  NormLayer                norm_a;
  ConvLayer                conv_b;
  NormLayer                norm_b;
  std::optional<ConvLayer> skip_proj; // present iff in/out widths differ
};

ResidualBlock make_residual_block(ModelState &state, std::string const &name, Index in, Index out, std::uint64_t seed);

/// relu(norm_b(conv_b(relu(norm_a(conv_a(x))))) + skip(x)), 3x3 convs with stride 1, pad 1.
Tensor residual_block_forward(Tensor const &x, ResidualBlock const &block);

/// 1x1 conv over the channel concatenation of x and the support features.
Tensor skip_fuse(Tensor const &x, Tensor const &support_feat, ConvLayer const &fuse);

/// Bilinear x2 resize followed by a 3x3 conv.
Tensor upsample_stage(Tensor const &x, ConvLayer const &up);

struct DecoderStage
{
  std::vector<ConvLayer>     fuse;   // one per block
  std::vector<ResidualBlock> blocks;
};

struct DecoderParams
{
  std::array<DecoderStage, 3> stages;
  std::array<ConvLayer, 2>    upsample;      // stage 1 -> 2, stage 2 -> 3
  ConvLayer                   support_up2;   // merged support features at 2R
  ConvLayer                   support_up4;   // merged support features at 4R
};

DecoderParams make_decoder(ModelState          &state,
                           std::string const   &prefix,
                           DecoderConfig const &config,
                           Index                conv5_channels,
                           Index                merged_channels,
                           std::uint64_t        seed);

/// Three stages at R, 2R and 4R. Every residual block is preceded by a skip
/// fusion with support features: conv5 in stage 1, the merged map resized
/// to the stage resolution in stages 2 and 3. Output [d3, 4R, 4R].
Tensor decoder_forward(Tensor const        &stage1_input,
                       Tensor const        &support_conv5,
                       Tensor const        &support_merged,
                       DecoderParams const &params,
                       DecoderConfig const &config);

} // namespace msdnet
