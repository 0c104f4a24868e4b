// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"
#include "msdnet/tensor.hpp"

#include <span>

namespace msdnet {

/// Class prototype pooled from support features.
struct Prototype
{
  Tensor vector;          // [C]
  int    shot_count = 1;
  int    empty_masks = 0; // shots whose mask had no foreground at feature resolution
};

/// Cosine prior of query pixels against the support.
struct PriorMap
{
  Tensor map; // [1,R,R], values in [-1, 1]
  int    shot_count = 1;
};

inline constexpr Scalar kCosineEps = 1e-8;

/// Masked average pooling: sum_ij F[c,i,j] m[i,j] / max(sum_ij m[i,j], 1).
/// An all-zero mask yields a zero vector with `empty_masks` set.
Prototype masked_average_pool(Tensor const &features, Tensor const &mask);

/// Mean of k prototypes.
Prototype aggregate_prototypes(std::span<Prototype const> protos);

/// Per-pixel cosine similarity of query features to the prototype.
PriorMap cmgm_similarity(Tensor const &query_merged, Prototype const &prototype);

/// Pointwise mean of k prior maps.
PriorMap aggregate_priors(std::span<PriorMap const> maps);

/// Decoder entry: 1x1 conv over [query; prior; broadcast prototype].
/// Pass `prior == nullptr` to drop the prior channel.
Tensor fuse_stage1_input(Tensor const    &query_merged,
                         PriorMap const  *prior,
                         Prototype const &prototype,
                         ConvLayer const &fuse);

} // namespace msdnet
