// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/backbone.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"

namespace msdnet {

void BackboneConfig::validate() const
{
  if (in_channels <= 0 || stem_channels <= 0 || merged_channels <= 0 || feature_res <= 0) {
    throw ArgumentError("backbone: channel counts and feature resolution must be positive");
  }
  for (Index c : stage_channels) {
    if (c <= 0) throw ArgumentError("backbone: stage channel counts must be positive");
  }
}

Tensor Backbone::ResidualStage::operator()(Tensor const &x) const
{
  return relu(add(conv_b(relu(conv_a(x))), proj(x)));
}

Backbone::Backbone(BackboneConfig const &config, ModelState &state)
  : config_(config)
{
  config_.validate();
  bool const          trainable = !config_.frozen;
  std::uint64_t const seed = config_.seed;

  stem1_ = make_conv(state, "backbone.stem1", {config_.in_channels, config_.stem_channels, 3, 2, 1}, seed, trainable);
  stem2_ = make_conv(state, "backbone.stem2", {config_.stem_channels, config_.stem_channels, 3, 2, 1}, seed, trainable);

  Index     in = config_.stem_channels;
  int const strides[3] = {2, 1, 1};
  int const dilations[3] = {1, 2, 4};
  for (int s = 0; s < 3; ++s) {
    Index const       out = config_.stage_channels[static_cast<std::size_t>(s)];
    std::string const name = "backbone.conv" + std::to_string(s + 3);
    int const         d = dilations[s];
    ResidualStage    &stage = stages_[static_cast<std::size_t>(s)];
    stage.conv_a = make_conv(state, name + ".a", {in, out, 3, strides[s], d, d}, seed, trainable);
    stage.conv_b = make_conv(state, name + ".b", {out, out, 3, 1, d, d, 1.0}, seed, trainable);
    stage.proj = make_conv(state, name + ".proj", {in, out, 1, strides[s], 0, 1, 1.0}, seed, trainable);
    in = out;
  }
}

FeatureBundle Backbone::extract_features(Tensor const &image) const
{
  Index const side = config_.input_side();
  if (image.rank() != 3 || image.dim(0) != config_.in_channels || image.dim(1) != side || image.dim(2) != side) {
    throw DimensionError("backbone expects an image of shape (" + std::to_string(config_.in_channels) + ", " +
                         std::to_string(side) + ", " + std::to_string(side) + "), got " + to_string(image.shape()));
  }
  Tensor        x = relu(stem2_(relu(stem1_(add_scalar(image, -0.5)))));
  FeatureBundle out;
  out.conv3 = stages_[0](x);
  out.conv4 = stages_[1](out.conv3);
  out.conv5 = stages_[2](out.conv4);
  return out;
}

Backbone build_backbone(BackboneConfig const &config, ModelState &state) { return Backbone(config, state); }

Tensor merge_midlevel(Tensor const &conv3, Tensor const &conv4, ConvLayer const &merge)
{
  if (conv3.rank() != 3 || conv4.rank() != 3 || conv3.dim(1) != conv4.dim(1) || conv3.dim(2) != conv4.dim(2)) {
    throw DimensionError("merge_midlevel: spatial mismatch " + to_string(conv3.shape()) + " vs " +
                         to_string(conv4.shape()));
  }
  return merge(concat({conv3, conv4}, 0));
}

} // namespace msdnet
