// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/model.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"
#include "msdnet/ops.hpp"

namespace msdnet {

namespace {

Tensor mean_of(std::vector<Tensor> const &xs)
{
  if (xs.size() == 1) return xs.front();
  Tensor acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, 1.0 / static_cast<Scalar>(xs.size()));
}

ModelConfig resolved(ModelConfig config)
{
  config.resolve();
  return config;
}

} // namespace

void ModelConfig::resolve()
{
  backbone.validate();
  decoder.base_res = backbone.feature_res;
  decoder.validate();
  std.out_dim = decoder.stage_channels[2];
  std.validate();
}

MsdNet::MsdNet(ModelConfig config)
  : config_(resolved(std::move(config)))
  , backbone_(config_.backbone, state_)
{
  auto const         &bb = config_.backbone;
  auto const         &dc = config_.decoder;
  std::uint64_t const seed = config_.seed;
  Index const         c = bb.merged_channels;

  merge_ = make_conv(state_, "merge", {bb.stage_channels[0] + bb.stage_channels[1], c, 1, 1, 0, 1, 1.0}, seed, true);
  Index const fuse_in = 2 * c + (config_.ablation.use_cmgm ? 1 : 0);
  fuse_ = make_conv(state_, "fuse", {fuse_in, dc.stage_channels[0], 1, 1, 0, 1, 1.0}, seed, true);

  if (config_.ablation.use_msd) {
    decoder_ = make_decoder(state_, "decoder", dc, bb.stage_channels[2], c, seed);
  } else {
    direct_up_ = make_conv(state_, "direct_up", {dc.stage_channels[0], dc.stage_channels[2], 3, 1, 1}, seed, true);
  }
  if (config_.ablation.use_std) {
    std_ = make_std(state_, "std", config_.std, c, seed);
  } else {
    final_conv_ = make_conv(state_, "final", {dc.stage_channels[2], 1, 1, 1, 0, 1, 1.0}, seed, true);
  }
}

FeatureBundle MsdNet::features(Tensor const &image) const
{
  if (config_.backbone.frozen) {
    NoGradScope guard;
    return backbone_.extract_features(image);
  }
  return backbone_.extract_features(image);
}

Tensor MsdNet::merged(FeatureBundle const &bundle) const
{
  return bundle.merged.defined() ? bundle.merged : merge_midlevel(bundle.conv3, bundle.conv4, merge_);
}

std::vector<Prototype> MsdNet::shot_prototypes(std::span<FeatureBundle const> support,
                                               std::span<Tensor const>        support_masks,
                                               std::vector<Tensor>           &merged_support) const
{
  if (support.empty()) throw ArgumentError("forward: at least one support shot is required");
  if (support.size() != support_masks.size()) throw ArgumentError("forward: support features and masks differ in count");
  Index const            r = config_.backbone.feature_res;
  std::vector<Prototype> protos;
  for (std::size_t i = 0; i < support.size(); ++i) {
    merged_support.push_back(merged(support[i]));
    Tensor const mask_r = resize_nearest(support_masks[i], r, r);
    protos.push_back(masked_average_pool(merged_support.back(), mask_r));
  }
  return protos;
}

PriorMap MsdNet::prior(std::span<FeatureBundle const> support,
                       std::span<Tensor const>        support_masks,
                       FeatureBundle const           &query) const
{
  std::vector<Tensor>   merged_support;
  auto const            protos = shot_prototypes(support, support_masks, merged_support);
  Tensor const          q = merged(query);
  std::vector<PriorMap> priors;
  for (auto const &p : protos) priors.push_back(cmgm_similarity(q, p));
  return aggregate_priors(priors);
}

ModelOutput MsdNet::forward(std::span<FeatureBundle const> support,
                            std::span<Tensor const>        support_masks,
                            FeatureBundle const           &query) const
{
  std::vector<Tensor> merged_support;
  auto const          protos = shot_prototypes(support, support_masks, merged_support);
  Tensor const        q = merged(query);
  Prototype const     proto = aggregate_prototypes(protos);

  std::optional<PriorMap> prior_map;
  if (config_.ablation.use_cmgm) {
    std::vector<PriorMap> priors;
    for (auto const &p : protos) priors.push_back(cmgm_similarity(q, p));
    prior_map = aggregate_priors(priors);
  }
  Tensor const stage1 = fuse_stage1_input(q, prior_map ? &*prior_map : nullptr, proto, fuse_);

  Tensor decoded;
  if (decoder_) {
    std::vector<Tensor> conv5;
    for (auto const &s : support) conv5.push_back(s.conv5);
    decoded = decoder_forward(stage1, mean_of(conv5), mean_of(merged_support), *decoder_, config_.decoder);
  } else {
    decoded = (*direct_up_)(bilinear_upsample(stage1, 4));
  }

  Tensor logits = std_ ? merge_dot_product(decoded, std_forward(proto, q, *std_, config_.std)) : (*final_conv_)(decoded);

  Index const side = config_.image_side();
  if (side % logits.dim(1) != 0) throw DimensionError("forward: image side is not a multiple of the decoder output");
  logits = bilinear_upsample(logits, static_cast<int>(side / logits.dim(1)));

  ModelOutput out;
  out.logits = logits;
  out.probabilities = sigmoid(logits);
  out.prototype = proto;
  out.empty_masks = proto.empty_masks;
  return out;
}

void MsdNet::load_state(ModelState const &loaded)
{
  for (auto const &[name, t] : state_.tensors()) {
    if (!loaded.contains(name)) {
      throw DimensionError("checkpoint is missing tensor '" + name + "' " + to_string(t.shape()) +
                           " required by this configuration");
    }
    Tensor const &src = loaded.get(name);
    if (src.shape() != t.shape()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + to_string(src.shape()) +
                           " but the configuration expects " + to_string(t.shape()));
    }
  }
  for (auto const &[name, t] : loaded.tensors()) {
    if (!state_.contains(name)) {
      throw DimensionError("checkpoint tensor '" + name + "' " + to_string(t.shape()) +
                           " has no counterpart in this configuration");
    }
  }
  for (auto &[name, t] : loaded.tensors()) state_.get(name).mutable_values() = t.values();
}

} // namespace msdnet
