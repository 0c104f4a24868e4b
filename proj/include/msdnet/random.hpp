// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace msdnet {

/// SplitMix64 generator. Satisfies UniformRandomBitGenerator, but the
/// helpers below are used instead of <random> distributions so that streams
/// are identical across standard library implementations.
class SplitMix64
{
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0)
    : state_(seed)
  {
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal (Box-Muller).
  double normal();

private:
  std::uint64_t state_;
  bool          has_spare_ = false;
  double        spare_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Seed for a named stream, independent of the order streams are created in.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace msdnet
