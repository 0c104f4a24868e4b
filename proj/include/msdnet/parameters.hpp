// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace msdnet {

/// Named tensors of a model: learnable parameters plus frozen ones.
class ModelState
{
public:
  using Map = std::map<std::string, Tensor>;

  /// Registers `t` under `name`; names are unique.
  Tensor &add(std::string const &name, Tensor t);

  bool          contains(std::string const &name) const { return tensors_.count(name) != 0; }
  Tensor       &get(std::string const &name);
  Tensor const &get(std::string const &name) const;

  Map const  &tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  bool        empty() const { return tensors_.empty(); }

  /// Tensors that take gradients, in name order.
  std::vector<Tensor> trainable() const;

private:
  Map tensors_;
};

/// Number of scalars in tensors that require gradients.
Index param_count(ModelState const &state);

/// He-style normal initializer: N(0, gain^2 / fan_in), stream keyed by (seed, name).
Tensor init_normal(Shape shape, Index fan_in, Scalar gain, std::uint64_t seed, std::string const &name);

struct ConvLayer
{
  Tensor weight;
  Tensor bias;
  int    stride = 1;
  int    padding = 0;
  int    dilation = 1;

  Tensor operator()(Tensor const &x) const;
  Index  in_channels() const { return weight.dim(1); }
  Index  out_channels() const { return weight.dim(0); }
};

struct ConvSpec
{
  Index  in = 0;
  Index  out = 0;
  Index  kernel = 1;
  int    stride = 1;
  int    padding = 0;
  int    dilation = 1;
  Scalar gain = 1.4142135623730951;
};

/// Registers `name.weight` and `name.bias`.
ConvLayer make_conv(ModelState &state, std::string const &name, ConvSpec const &spec, std::uint64_t seed, bool trainable);

/// standardize(x) over all of a [C,H,W] map or a [1,C] token, then a
/// per-channel gain and bias.
struct NormLayer
{
  Tensor gain; // [C]
  Tensor bias; // [C]

  Tensor operator()(Tensor const &x) const;
};

NormLayer make_norm(ModelState &state, std::string const &name, Index channels);

/// y = x W + b over rows of x; weight stored [in, out].
struct LinearLayer
{
  Tensor weight;
  Tensor bias;

  Tensor operator()(Tensor const &x) const;
};

LinearLayer make_linear(ModelState   &state,
                        std::string const &name,
                        Index         in,
                        Index         out,
                        std::uint64_t seed,
                        Scalar        gain = 1.0);

} // namespace msdnet
