// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <vector>

namespace msdnet {

// Every operator below records onto the active tape when at least one input
// requires a gradient. Spatial operators accept [C,H,W] or [N,C,H,W].

/// 2-D cross-correlation. `bias` may be an undefined Tensor.
/// Output extent: floor((H + 2*padding - dilation*(kh-1) - 1)/stride) + 1.
Tensor conv2d(Tensor const &input,
              Tensor const &weight,
              Tensor const &bias,
              int           stride = 1,
              int           padding = 0,
              int           dilation = 1);

Tensor matmul(Tensor const &a, Tensor const &b);
Tensor transpose(Tensor const &x);

/// Max-subtracted softmax along `axis`.
Tensor softmax(Tensor const &x, int axis);

// Binary ops broadcast numpy-style (trailing alignment, extents equal or 1).
Tensor add(Tensor const &a, Tensor const &b);
Tensor sub(Tensor const &a, Tensor const &b);
Tensor mul(Tensor const &a, Tensor const &b);

Tensor scale(Tensor const &x, Scalar factor);
Tensor add_scalar(Tensor const &x, Scalar value);
Tensor reciprocal(Tensor const &x);
Tensor relu(Tensor const &x);
Tensor sigmoid(Tensor const &x);

/// Reductions drop the reduced axis.
Tensor sum(Tensor const &x, int axis);
Tensor mean(Tensor const &x, int axis);
Tensor sum_all(Tensor const &x);
Tensor mean_all(Tensor const &x);

Tensor concat(std::vector<Tensor> const &parts, int axis);
Tensor narrow(Tensor const &x, int axis, Index start, Index length);
Tensor reshape(Tensor const &x, Shape shape);
Tensor expand(Tensor const &x, Shape shape);

/// x / sqrt(sum(x^2) + eps) along `axis`.
Tensor l2_normalize(Tensor const &x, int axis, Scalar eps);

/// (x - mean) / sqrt(var + eps) over all entries of x.
Tensor standardize(Tensor const &x, Scalar eps = 1e-5);

/// Bilinear resize of the two trailing axes by an integer factor,
/// half-pixel centres (align_corners = false).
Tensor bilinear_upsample(Tensor const &x, int scale);

/// Per-pixel cosine similarity between features [C,H,W] and a vector [C]:
/// <f_ij, v> / (|f_ij| |v| + eps). Result is [1,H,W].
Tensor cosine_similarity_map(Tensor const &features, Tensor const &vec, Scalar eps = 1e-8);

} // namespace msdnet
