// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/optim.hpp"

#include "msdnet/errors.hpp"

#include <cmath>

namespace msdnet {

void adam_step(Tensor &param, Vector const &grad, AdamMoments &moments, long step, AdamConfig const &config)
{
  if (grad.size() != param.numel()) throw DimensionError("adam_step: gradient size does not match parameter");
  if (step < 1) throw ArgumentError("adam_step: step counts from 1");
  if (moments.m.size() != grad.size()) {
    moments.m = Vector::Zero(grad.size());
    moments.v = Vector::Zero(grad.size());
  }
  moments.m = config.beta1 * moments.m + (1 - config.beta1) * grad;
  moments.v = config.beta2 * moments.v + (1 - config.beta2) * grad.cwiseAbs2();
  Scalar const c1 = 1 - std::pow(config.beta1, static_cast<Scalar>(step));
  Scalar const c2 = 1 - std::pow(config.beta2, static_cast<Scalar>(step));
  auto const   m_hat = moments.m.array() / c1;
  auto const   v_hat = moments.v.array() / c2;
  param.mutable_values().array() -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
}

Adam::Adam(ModelState const &state, AdamConfig config)
  : config_(config)
{
  if (!(config_.lr > 0)) throw ConfigError("Adam: learning rate must be positive");
  for (auto const &[name, t] : state.tensors()) {
    if (!t.requires_grad()) continue;
    names_.push_back(name);
    params_.push_back(t);
  }
  moments_.resize(params_.size());
}

void Adam::step(std::vector<Vector> const &grads)
{
  if (grads.size() != params_.size()) throw DimensionError("Adam: gradient count does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) throw NumericError("non-finite gradient for parameter '" + names_[i] + "'");
  }
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i], grads[i], moments_[i], step_, config_);
}

void Adam::step(Gradients const &grads)
{
  std::vector<Vector> g;
  g.reserve(params_.size());
  for (auto const &p : params_) g.push_back(grads.of(p).values());
  step(g);
}

} // namespace msdnet
