// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/grad_check.hpp"

#include "msdnet/errors.hpp"

#include <algorithm>
#include <cmath>

namespace msdnet {

namespace {

Scalar evaluate(std::function<Tensor()> const &f)
{
  NoGradScope  guard;
  Scalar const v = f().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

} // namespace

Scalar grad_check_leaves(std::function<Tensor()> const &f, std::vector<Tensor> leaves, Scalar eps)
{
  if (eps <= 0) throw ArgumentError("grad_check: eps must be positive");
  for (auto const &leaf : leaves) {
    if (!leaf.requires_grad()) throw ArgumentError("grad_check: leaf does not require a gradient");
  }

  Gradients grads;
  {
    Tape      tape;
    TapeScope scope(tape);
    Tensor    out = f();
    if (out.numel() != 1) throw ArgumentError("grad_check: function must return a scalar");
    if (!std::isfinite(out.item())) throw NumericError("grad_check: function value is not finite");
    if (!out.requires_grad()) {
      // Output independent of every leaf; analytic gradient is zero.
      grads = Gradients();
    } else {
      grads = tape.backward(out);
    }
  }

  Scalar worst = 0;
  for (auto &leaf : leaves) {
    Vector const analytic = grads.of(leaf).values();
    Vector      &values = leaf.mutable_values();
    for (Index i = 0; i < values.size(); ++i) {
      Scalar const saved = values[i];
      values[i] = saved + eps;
      Scalar const plus = evaluate(f);
      values[i] = saved - eps;
      Scalar const minus = evaluate(f);
      values[i] = saved;
      Scalar const numeric = (plus - minus) / (2 * eps);
      Scalar const denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

Scalar grad_check(std::function<Tensor(Tensor const &)> const &f, Tensor const &x, Scalar eps)
{
  Tensor leaf(x.shape(), x.values(), true);
  return grad_check_leaves([&] { return f(leaf); }, {leaf}, eps);
}

} // namespace msdnet
