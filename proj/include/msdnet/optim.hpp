// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"
#include "msdnet/tensor.hpp"

#include <string>
#include <vector>

namespace msdnet {

struct AdamConfig
{
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

/// First and second moment estimates of one parameter.
struct AdamMoments
{
  Vector m;
  Vector v;
};

/// One bias-corrected Adam update of `param` in place. `step` counts from 1.
void adam_step(Tensor &param, Vector const &grad, AdamMoments &moments, long step, AdamConfig const &config);

/// Adam over the trainable tensors of a ModelState. Frozen tensors are never touched.
class Adam
{
public:
  Adam(ModelState const &state, AdamConfig config);

  /// Applies one update; gradients missing from `grads` count as zero.
  /// Throws NumericError naming the first parameter with a non-finite gradient.
  void step(Gradients const &grads);
  void step(std::vector<Vector> const &grads);

  long                            steps() const { return step_; }
  std::vector<std::string> const &names() const { return names_; }
  std::vector<Tensor> const      &params() const { return params_; }
  AdamConfig const               &config() const { return config_; }

private:
  AdamConfig               config_;
  std::vector<std::string> names_;
  std::vector<Tensor>      params_;
  std::vector<AdamMoments> moments_;
  long                     step_ = 0;
};

} // namespace msdnet
