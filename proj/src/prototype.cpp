// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/prototype.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"

namespace msdnet {

Prototype masked_average_pool(Tensor const &features, Tensor const &mask)
{
  if (features.rank() != 3) throw DimensionError("masked_average_pool: features must be [C,R,R]");
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != features.dim(1) || mask.dim(2) != features.dim(2)) {
    throw DimensionError("masked_average_pool: mask " + to_string(mask.shape()) + " does not match features " +
                         to_string(features.shape()));
  }
  Scalar area = 0;
  for (Scalar m : mask.values()) {
    if (m != 0.0 && m != 1.0) throw ArgumentError("masked_average_pool: mask must be binary");
    area += m;
  }
  Index const c = features.dim(0);
  Index const hw = features.dim(1) * features.dim(2);

  Tensor const masked = mul(features, mask);
  Prototype    out;
  out.vector = scale(sum(reshape(masked, {c, hw}), 1), 1.0 / std::max(area, 1.0));
  out.empty_masks = area == 0 ? 1 : 0;
  return out;
}

Prototype aggregate_prototypes(std::span<Prototype const> protos)
{
  if (protos.empty()) throw ArgumentError("aggregate_prototypes: empty list");
  if (protos.size() == 1) return protos.front();

  Index const         c = protos.front().vector.numel();
  std::vector<Tensor> rows;
  Prototype           out;
  for (auto const &p : protos) {
    if (p.vector.numel() != c) throw DimensionError("aggregate_prototypes: channel widths differ");
    rows.push_back(reshape(p.vector, {1, c}));
    out.empty_masks += p.empty_masks;
  }
  out.shot_count = static_cast<int>(protos.size());
  out.vector = mean(concat(rows, 0), 0);
  return out;
}

PriorMap cmgm_similarity(Tensor const &query_merged, Prototype const &prototype)
{
  PriorMap out;
  out.map = cosine_similarity_map(query_merged, prototype.vector, kCosineEps);
  out.shot_count = 1;
  return out;
}

PriorMap aggregate_priors(std::span<PriorMap const> maps)
{
  if (maps.empty()) throw ArgumentError("aggregate_priors: empty list");
  if (maps.size() == 1) return maps.front();
  Tensor acc = maps.front().map;
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (maps[i].map.shape() != acc.shape()) throw DimensionError("aggregate_priors: shape mismatch");
    acc = add(acc, maps[i].map);
  }
  PriorMap out;
  out.map = scale(acc, 1.0 / static_cast<Scalar>(maps.size()));
  out.shot_count = static_cast<int>(maps.size());
  return out;
}

Tensor fuse_stage1_input(Tensor const &query_merged, PriorMap const *prior, Prototype const &prototype, ConvLayer const &fuse)
{
  if (query_merged.rank() != 3) throw DimensionError("fuse_stage1_input: query features must be [C,R,R]");
  Index const c = query_merged.dim(0), h = query_merged.dim(1), w = query_merged.dim(2);
  if (prototype.vector.numel() != c) {
    throw DimensionError("fuse_stage1_input: prototype width " + std::to_string(prototype.vector.numel()) +
                         " vs query channels " + std::to_string(c));
  }
  std::vector<Tensor> parts{query_merged};
  if (prior) parts.push_back(prior->map);
  parts.push_back(expand(reshape(prototype.vector, {c, 1, 1}), {c, h, w}));
  Tensor const stacked = concat(parts, 0);
  if (stacked.dim(0) != fuse.in_channels()) {
    throw DimensionError("fuse_stage1_input: fuse conv expects " + std::to_string(fuse.in_channels()) +
                         " channels, got " + std::to_string(stacked.dim(0)));
  }
  return fuse(stacked);
}

} // namespace msdnet
