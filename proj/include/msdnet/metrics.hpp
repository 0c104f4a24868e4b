// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace msdnet {

/// Smoothing constant of the soft Dice loss.
inline constexpr Scalar kDiceSmooth = 1.0;

/// 1 - (2 sum(p t) + 1) / (sum(p) + sum(t) + 1). Differentiable in `pred`.
Tensor dice_loss(Tensor const &pred, Tensor const &target);

/// Indicator of logit >= 0 (sigmoid >= 0.5); a zero logit maps to foreground.
Tensor binarize(Tensor const &logits);

/// |a and b| / |a or b|; 1 when both are empty.
Scalar iou(Tensor const &pred, Tensor const &gt);

/// Pixel confusion counts of a binary prediction.
struct Confusion
{
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion &operator+=(Confusion const &o);
  Scalar     foreground_iou() const;
  Scalar     background_iou() const;
};

Confusion confusion(Tensor const &pred, Tensor const &gt);

struct MiouSummary
{
  std::map<int, Scalar> per_class_iou;
  Scalar                miou = 0;
};

/// Per-class mean of episode IoUs, then an unweighted mean over classes.
MiouSummary compute_miou(std::vector<std::pair<int, Scalar>> const &episode_results);

/// Two-class IoU over confusion counts pooled across all episodes, averaged
/// over foreground and background.
Scalar compute_fb_iou(std::vector<std::pair<Tensor, Tensor>> const &episode_results);
Scalar fb_iou(Confusion const &pooled);

struct MetricsReport
{
  std::map<int, Scalar> per_class_iou;
  Scalar                miou = 0;
  Scalar                fb_iou = 0;
  int                   n_episodes = 0;
  std::uint64_t         seed = 0;
  int                   empty_mask_warnings = 0;
};

} // namespace msdnet
