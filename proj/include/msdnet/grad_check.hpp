// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <functional>
#include <vector>

namespace msdnet {

/// Max over components of |analytic - central difference| / max(1, |analytic|, |numeric|)
/// for the scalar function `f` at `x`.
Scalar grad_check(std::function<Tensor(Tensor const &)> const &f, Tensor const &x, Scalar eps = 1e-5);

/// Same measure over several leaf tensors that `f` reads implicitly (module
/// parameters). Leaves must require gradients; their values are perturbed in
/// place and restored before returning.
Scalar grad_check_leaves(std::function<Tensor()> const &f, std::vector<Tensor> leaves, Scalar eps = 1e-5);

} // namespace msdnet
