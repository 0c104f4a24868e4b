// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/attention.hpp"
#include "msdnet/backbone.hpp"
#include "msdnet/decoder.hpp"
#include "msdnet/parameters.hpp"
#include "msdnet/prototype.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace msdnet {

/// Component switches for ablation runs. Disabled components are replaced
/// by the smallest shape-preserving substitute:
///   no CMGM -> the stage-1 fusion drops the prior channel;
///   no STD  -> logits from a learnable 1x1 conv over the decoder map;
///   no MSD  -> one bilinear x4 resize and a 3x3 conv instead of the decoder.
struct AblationConfig
{
  bool use_cmgm = true;
  bool use_std = true;
  bool use_msd = true;

  bool operator==(AblationConfig const &) const = default;
};

struct ModelConfig
{
  BackboneConfig backbone;
  DecoderConfig  decoder;
  StdConfig      std;
  AblationConfig ablation;
  std::uint64_t  seed = 42; // initialization of learnable parameters

  Index image_side() const { return backbone.input_side(); }

  /// Fills derived fields (decoder base resolution, STD output width) and
  /// checks cross-module consistency.
  void resolve();
};

struct ModelOutput
{
  Tensor    logits;        // [1,S,S]
  Tensor    probabilities; // sigmoid(logits)
  Prototype prototype;
  int       empty_masks = 0;
};

class MsdNet
{
public:
  explicit MsdNet(ModelConfig config);
  MsdNet(MsdNet const &) = delete;
  MsdNet &operator=(MsdNet const &) = delete;

  ModelConfig const &config() const { return config_; }
  ModelState        &state() { return state_; }
  ModelState const  &state() const { return state_; }
  Backbone const    &backbone() const { return backbone_; }

  /// Backbone maps of one image; no tape is used when the backbone is frozen.
  FeatureBundle features(Tensor const &image) const;

  /// Full prediction for k support shots (features plus [1,S,S] masks) and a query.
  ModelOutput forward(std::span<FeatureBundle const> support,
                      std::span<Tensor const>        support_masks,
                      FeatureBundle const           &query) const;

  /// CMGM prior averaged over shots, [1,R,R]. Uses the current merge weights.
  PriorMap prior(std::span<FeatureBundle const> support,
                 std::span<Tensor const>        support_masks,
                 FeatureBundle const           &query) const;

  /// Copies tensor values from `loaded`; names and shapes must match exactly.
  void load_state(ModelState const &loaded);

private:
  Tensor merged(FeatureBundle const &bundle) const;
  std::vector<Prototype> shot_prototypes(std::span<FeatureBundle const> support,
                                         std::span<Tensor const>        support_masks,
                                         std::vector<Tensor>           &merged_support) const;

  ModelConfig              config_;
  ModelState               state_;
  Backbone                 backbone_;
  ConvLayer                merge_;
  ConvLayer                fuse_;
  std::optional<DecoderParams> decoder_;
  std::optional<ConvLayer>     direct_up_;
  std::optional<StdParams>     std_;
  std::optional<ConvLayer>     final_conv_;
};

} // namespace msdnet
