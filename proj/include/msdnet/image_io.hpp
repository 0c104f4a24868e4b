// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msdnet {

// Binary PPM (P6) images and PGM (P5) masks, maxval 255.
// Images load as [3,H,W] in [0,1]; masks as [1,H,W] thresholded at 128 to {0,1}.

Tensor parse_ppm(std::span<std::uint8_t const> bytes);
Tensor parse_mask_pgm(std::span<std::uint8_t const> bytes);
std::vector<std::uint8_t> encode_ppm(Tensor const &image);
std::vector<std::uint8_t> encode_mask_pgm(Tensor const &mask);

Tensor read_image_ppm(std::filesystem::path const &path);
Tensor read_mask_pgm(std::filesystem::path const &path);
void   write_image_ppm(std::filesystem::path const &path, Tensor const &image);
/// Foreground (nonzero) pixels are written as 255, background as 0.
void   write_mask_pgm(std::filesystem::path const &path, Tensor const &mask);

std::vector<std::uint8_t> read_file(std::filesystem::path const &path);
void write_file(std::filesystem::path const &path, std::span<std::uint8_t const> bytes);

/// Half-pixel bilinear resize of [C,H,W] to [C,out_h,out_w]. Not differentiable.
Tensor resize_bilinear(Tensor const &image, Index out_h, Index out_w);
/// Nearest-neighbour resize of [C,H,W]; preserves the value set (mask binariness).
Tensor resize_nearest(Tensor const &mask, Index out_h, Index out_w);

} // namespace msdnet
