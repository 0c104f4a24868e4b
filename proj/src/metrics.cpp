// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/metrics.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"

namespace msdnet {

namespace {

void require_same_shape(Tensor const &a, Tensor const &b, char const *what)
{
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

} // namespace

Tensor dice_loss(Tensor const &pred, Tensor const &target)
{
  require_same_shape(pred, target, "dice_loss");
  Tensor const overlap = sum_all(mul(pred, target));
  Tensor const numer = add_scalar(scale(overlap, 2.0), kDiceSmooth);
  Tensor const denom = add_scalar(add(sum_all(pred), sum_all(target)), kDiceSmooth);
  return add_scalar(scale(mul(numer, reciprocal(denom)), -1.0), 1.0);
}

Tensor binarize(Tensor const &logits)
{
  return Tensor(logits.shape(), (logits.values().array() >= 0.0).cast<Scalar>().matrix());
}

Confusion &Confusion::operator+=(Confusion const &o)
{
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Scalar Confusion::foreground_iou() const
{
  std::int64_t const uni = tp + fp + fn;
  return uni == 0 ? 1.0 : static_cast<Scalar>(tp) / static_cast<Scalar>(uni);
}

Scalar Confusion::background_iou() const
{
  std::int64_t const uni = tn + fp + fn;
  return uni == 0 ? 1.0 : static_cast<Scalar>(tn) / static_cast<Scalar>(uni);
}

Confusion confusion(Tensor const &pred, Tensor const &gt)
{
  require_same_shape(pred, gt, "confusion");
  Confusion c;
  for (Index i = 0; i < pred.numel(); ++i) {
    bool const p = pred.values()[i] != 0.0;
    bool const g = gt.values()[i] != 0.0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Scalar iou(Tensor const &pred, Tensor const &gt)
{
  require_same_shape(pred, gt, "iou");
  return confusion(pred, gt).foreground_iou();
}

MiouSummary compute_miou(std::vector<std::pair<int, Scalar>> const &episode_results)
{
  if (episode_results.empty()) throw ArgumentError("compute_miou: no episodes");
  std::map<int, std::pair<Scalar, int>> acc;
  for (auto const &[cls, value] : episode_results) {
    auto &a = acc[cls];
    a.first += value;
    a.second += 1;
  }
  MiouSummary out;
  for (auto const &[cls, a] : acc) {
    out.per_class_iou[cls] = a.first / a.second;
    out.miou += out.per_class_iou[cls];
  }
  out.miou /= static_cast<Scalar>(acc.size());
  return out;
}

Scalar fb_iou(Confusion const &pooled) { return 0.5 * (pooled.foreground_iou() + pooled.background_iou()); }

Scalar compute_fb_iou(std::vector<std::pair<Tensor, Tensor>> const &episode_results)
{
  if (episode_results.empty()) throw ArgumentError("compute_fb_iou: no episodes");
  Confusion pooled;
  for (auto const &[pred, gt] : episode_results) pooled += confusion(pred, gt);
  return fb_iou(pooled);
}

} // namespace msdnet
