// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"
#include "msdnet/tensor.hpp"

#include <array>
#include <cstdint>

namespace msdnet {

struct BackboneConfig
{
  Index                in_channels = 3;
  Index                stem_channels = 24;
  std::array<Index, 3> stage_channels{32, 48, 64}; // conv3, conv4, conv5
  Index                feature_res = 8;            // R
  Index                merged_channels = 64;
  bool                 frozen = true;
  std::uint64_t        seed = 1;

  /// Input images are square with side 8R.
  Index input_side() const { return 8 * feature_res; }
  void  validate() const;
};

/// Stage outputs of one image plus its merged mid-level map.
struct FeatureBundle
{
  Tensor conv3;
  Tensor conv4;
  Tensor conv5;
  Tensor merged; // undefined until merge_midlevel runs
};

/// Stride-8 convolutional encoder whose three stage outputs share one R x R
/// resolution: two strided stem convolutions, one strided residual stage,
/// then two residual stages with dilation 2 and 4. The same weights serve
/// support and query images.
class Backbone
{
public:
  Backbone(BackboneConfig const &config, ModelState &state);

  BackboneConfig const &config() const { return config_; }

  /// conv3/conv4/conv5 maps of a [3, 8R, 8R] image; `merged` left empty.
  FeatureBundle extract_features(Tensor const &image) const;

private:
  struct ResidualStage
  {
    ConvLayer conv_a;
    ConvLayer conv_b;
    ConvLayer proj;

    Tensor operator()(Tensor const &x) const;
  };

  BackboneConfig               config_;
  ConvLayer                    stem1_;
  ConvLayer                    stem2_;
  std::array<ResidualStage, 3> stages_;
};

Backbone build_backbone(BackboneConfig const &config, ModelState &state);

/// C_1x1(Cat(conv3, conv4)).
Tensor merge_midlevel(Tensor const &conv3, Tensor const &conv4, ConvLayer const &merge);

} // namespace msdnet
