// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/parameters.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace msdnet {

/// Checkpoint layout, all integers little-endian:
///   "MSDN" | u32 version | records...
///   record = u64 name length | name bytes | u64 rank | u64 extents[rank] | f64 payload
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(ModelState const &state);
/// Decoded tensors do not require gradients.
ModelState decode_checkpoint(std::span<std::uint8_t const> bytes);

void       checkpoint_save(ModelState const &state, std::filesystem::path const &path);
ModelState checkpoint_load(std::filesystem::path const &path);

} // namespace msdnet
