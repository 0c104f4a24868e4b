// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/parameters.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/ops.hpp"
#include "msdnet/random.hpp"

#include <cmath>

namespace msdnet {

Tensor &ModelState::add(std::string const &name, Tensor t)
{
  auto [it, inserted] = tensors_.emplace(name, std::move(t));
  if (!inserted) throw ArgumentError("duplicate parameter name '" + name + "'");
  return it->second;
}

Tensor &ModelState::get(std::string const &name)
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor const &ModelState::get(std::string const &name) const
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<Tensor> ModelState::trainable() const
{
  std::vector<Tensor> out;
  for (auto const &[name, t] : tensors_) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

Index param_count(ModelState const &state)
{
  Index total = 0;
  for (auto const &[name, t] : state.tensors()) {
    if (t.requires_grad()) total += t.numel();
  }
  return total;
}

Tensor init_normal(Shape shape, Index fan_in, Scalar gain, std::uint64_t seed, std::string const &name)
{
  SplitMix64   rng(derive_seed(seed, name));
  Scalar const stddev = gain / std::sqrt(static_cast<Scalar>(std::max<Index>(fan_in, 1)));
  Vector       v(numel(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

Tensor ConvLayer::operator()(Tensor const &x) const { return conv2d(x, weight, bias, stride, padding, dilation); }

ConvLayer make_conv(ModelState &state, std::string const &name, ConvSpec const &spec, std::uint64_t seed, bool trainable)
{
  if (spec.in <= 0 || spec.out <= 0 || spec.kernel <= 0) {
    throw ArgumentError("convolution '" + name + "' needs positive channel counts and kernel size");
  }
  std::string const wname = name + ".weight";
  std::string const bname = name + ".bias";
  Tensor            w = init_normal({spec.out, spec.in, spec.kernel, spec.kernel}, spec.in * spec.kernel * spec.kernel,
                                    spec.gain, seed, wname);
  Tensor            b = Tensor::zeros({spec.out});
  w.set_requires_grad(trainable);
  b.set_requires_grad(trainable);
  ConvLayer layer;
  layer.weight = state.add(wname, w);
  layer.bias = state.add(bname, b);
  layer.stride = spec.stride;
  layer.padding = spec.padding;
  layer.dilation = spec.dilation;
  return layer;
}

Tensor NormLayer::operator()(Tensor const &x) const
{
  Index const c = gain.dim(0);
  if (x.rank() == 2 && x.dim(0) == 1 && x.dim(1) == c) return add(mul(standardize(x), gain), bias);
  if (x.rank() != 3 || x.dim(0) != c) {
    throw DimensionError("norm layer over " + std::to_string(c) + " channels got " + to_string(x.shape()));
  }
  Shape const per_channel{c, 1, 1};
  return add(mul(standardize(x), reshape(gain, per_channel)), reshape(bias, per_channel));
}

NormLayer make_norm(ModelState &state, std::string const &name, Index channels)
{
  if (channels <= 0) throw ArgumentError("norm layer '" + name + "' needs a positive width");
  NormLayer layer;
  layer.gain = state.add(name + ".gain", Tensor::full({channels}, 1.0).set_requires_grad(true));
  layer.bias = state.add(name + ".bias", Tensor::zeros({channels}).set_requires_grad(true));
  return layer;
}

Tensor LinearLayer::operator()(Tensor const &x) const { return add(matmul(x, weight), bias); }

LinearLayer make_linear(ModelState &state, std::string const &name, Index in, Index out, std::uint64_t seed, Scalar gain)
{
  if (in <= 0 || out <= 0) throw ArgumentError("linear layer '" + name + "' needs positive widths");
  std::string const wname = name + ".weight";
  LinearLayer       layer;
  layer.weight = state.add(wname, init_normal({in, out}, in, gain, seed, wname).set_requires_grad(true));
  layer.bias = state.add(name + ".bias", Tensor::zeros({out}).set_requires_grad(true));
  return layer;
}

} // namespace msdnet
