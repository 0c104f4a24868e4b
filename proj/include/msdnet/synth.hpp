// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/data.hpp"

#include <cstdint>
#include <filesystem>

namespace msdnet {

struct SynthConfig
{
  int           n_classes = 8;
  int           imgs_per_class = 40;
  Index         side = 64;
  std::uint64_t seed = 7;
};

/// Shape families in class order; class i uses family i mod 8.
inline constexpr char const *kShapeFamilies[8] = {"disk", "square", "triangle", "ring",
                                                  "cross", "bar", "l_shape", "diamond"};

/// Foreground fraction bounds every generated mask satisfies.
inline constexpr double kMinForeground = 0.02;
inline constexpr double kMaxForeground = 0.6;

/// Writes images/*.ppm, masks/*.pgm and manifest.json under `out_dir`.
///
/// Each class is a shape family painted in a class-specific hue (with
/// per-instance jitter of hue, saturation and value) at a random position and
/// scale, over a textured low-saturation background carrying one or two
/// distractor shapes of other classes. The mask marks only the target shape.
DatasetManifest synth_generate(std::filesystem::path const &out_dir, SynthConfig const &config);

} // namespace msdnet
