// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/random.hpp"

#include <cmath>
#include <numbers>

namespace msdnet {

std::uint64_t mix64(std::uint64_t z)
{
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SplitMix64::result_type SplitMix64::operator()()
{
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

double SplitMix64::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::below(std::uint64_t n)
{
  if (n <= 1) return 0;
  std::uint64_t const limit = max() - max() % n;
  std::uint64_t       r;
  do {
    r = (*this)();
  } while (r >= limit);
  return r % n;
}

double SplitMix64::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double const u2 = uniform();
  double const r = std::sqrt(-2.0 * std::log(u1));
  double const theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name)
{
  // FNV-1a over the name, then folded into the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(seed) ^ h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return mix64(mix64(seed) ^ mix64(index + 1)); }

} // namespace msdnet
