// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/synth.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"
#include "msdnet/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace msdnet {

namespace {

using Rgb = std::array<double, 3>;

Rgb hsv_to_rgb(double h, double s, double v)
{
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  double const c = v * s;
  double const x = c * (1 - std::abs(std::fmod(h / 60.0, 2.0) - 1));
  double const m = v - c;
  Rgb          rgb{};
  switch (static_cast<int>(h / 60.0)) {
  case 0: rgb = {c, x, 0}; break;
  case 1: rgb = {x, c, 0}; break;
  case 2: rgb = {0, c, x}; break;
  case 3: rgb = {0, x, c}; break;
  case 4: rgb = {x, 0, c}; break;
  default: rgb = {c, 0, x}; break;
  }
  return {rgb[0] + m, rgb[1] + m, rgb[2] + m};
}

struct ShapeInstance
{
  int    family = 0;
  double cx = 0, cy = 0, size = 0;
  bool   flip = false; // orientation variant for asymmetric families
};

bool inside(ShapeInstance const &s, double px, double py)
{
  double dx = (px - s.cx) / s.size;
  double dy = (py - s.cy) / s.size;
  if (s.flip) std::swap(dx, dy);
  double const r = std::hypot(dx, dy);
  switch (s.family) {
  case 0: return r <= 1.0;
  case 1: return std::abs(dx) <= 0.85 && std::abs(dy) <= 0.85;
  case 2: return dy >= -1.0 && dy <= 1.0 && std::abs(dx) <= (dy + 1.0) * 0.5;
  case 3: return r <= 1.0 && r >= 0.55;
  case 4: return (std::abs(dx) <= 0.3 && std::abs(dy) <= 1.0) || (std::abs(dy) <= 0.3 && std::abs(dx) <= 1.0);
  case 5: return std::abs(dx) <= 1.0 && std::abs(dy) <= 0.35;
  case 6:
    return (std::abs(dx + 0.65) <= 0.35 && std::abs(dy) <= 1.0) || (dy >= 0.3 && dy <= 1.0 && std::abs(dx) <= 1.0);
  default: return std::abs(dx) + std::abs(dy) <= 1.0;
  }
}

ShapeInstance random_shape(SplitMix64 &rng, int family, Index side)
{
  ShapeInstance s;
  s.family = family;
  s.size = rng.uniform(0.2, 0.4) * static_cast<double>(side);
  double const lo = s.size, hi = static_cast<double>(side) - s.size;
  s.cx = rng.uniform(lo, hi);
  s.cy = rng.uniform(lo, hi);
  s.flip = rng.uniform() < 0.5;
  return s;
}

double class_hue(int class_id, int n_classes) { return 360.0 * class_id / n_classes; }

Rgb instance_color(SplitMix64 &rng, int class_id, int n_classes)
{
  double const hue = class_hue(class_id, n_classes) + rng.uniform(-8.0, 8.0);
  return hsv_to_rgb(hue, rng.uniform(0.65, 0.95), rng.uniform(0.75, 1.0));
}

void paint(Vector &img, Index side, ShapeInstance const &s, Rgb const &color, Vector *mask)
{
  Index const plane = side * side;
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) {
      if (!inside(s, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
      Index const p = y * side + x;
      for (int c = 0; c < 3; ++c) img[c * plane + p] = color[static_cast<std::size_t>(c)];
      if (mask) (*mask)[p] = 1.0;
    }
  }
}

/// Low-saturation background: tinted gradient, a few soft blobs, pixel noise.
void paint_background(Vector &img, Index side, SplitMix64 &rng)
{
  Index const  plane = side * side;
  double const base = rng.uniform(0.25, 0.55);
  double const gx = rng.uniform(-0.15, 0.15), gy = rng.uniform(-0.15, 0.15);
  Rgb const    tint{rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04), rng.uniform(-0.04, 0.04)};
  struct Blob
  {
    double x, y, radius, amp;
  };
  std::array<Blob, 3> blobs{};
  for (auto &b : blobs) {
    b = {rng.uniform(0, static_cast<double>(side)), rng.uniform(0, static_cast<double>(side)),
         rng.uniform(0.1, 0.3) * static_cast<double>(side), rng.uniform(-0.12, 0.12)};
  }
  for (Index y = 0; y < side; ++y) {
    for (Index x = 0; x < side; ++x) {
      double const u = static_cast<double>(x) / static_cast<double>(side) - 0.5;
      double const v = static_cast<double>(y) / static_cast<double>(side) - 0.5;
      double       g = base + gx * u + gy * v;
      for (auto const &b : blobs) {
        double const d2 = (std::pow(static_cast<double>(x) - b.x, 2) + std::pow(static_cast<double>(y) - b.y, 2)) /
                          (b.radius * b.radius);
        g += b.amp * std::exp(-d2);
      }
      double const noise = rng.uniform(-0.05, 0.05);
      for (int c = 0; c < 3; ++c) {
        img[c * plane + y * side + x] = std::clamp(g + tint[static_cast<std::size_t>(c)] + noise, 0.0, 1.0);
      }
    }
  }
}

std::string entry_name(int class_id, int index, char const *ext)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "c%02d_%03d.%s", class_id, index, ext);
  return buf;
}

} // namespace

DatasetManifest synth_generate(std::filesystem::path const &out_dir, SynthConfig const &config)
{
  if (config.n_classes < 2) throw ArgumentError("synth: at least two classes are required");
  if (config.imgs_per_class < 1 || config.side < 16) throw ArgumentError("synth: invalid image count or side");

  namespace fs = std::filesystem;
  std::error_code ec;
  for (auto const &dir : {out_dir, out_dir / "images", out_dir / "masks"}) {
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  }

  Index const     side = config.side;
  Index const     plane = side * side;
  DatasetManifest manifest;
  manifest.root = out_dir;
  for (int c = 0; c < config.n_classes; ++c) {
    std::string name = kShapeFamilies[c % 8];
    if (c >= 8) name += "_" + std::to_string(c / 8);
    manifest.class_names[c] = name;
  }

  for (int c = 0; c < config.n_classes; ++c) {
    for (int i = 0; i < config.imgs_per_class; ++i) {
      SplitMix64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(c) * 100003u + static_cast<std::uint64_t>(i)));
      Vector     img(3 * plane);
      Vector     mask;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 100) throw Error("synth: could not satisfy the foreground bounds");
        img.setZero();
        mask = Vector::Zero(plane);
        paint_background(img, side, rng);
        int const distractors = 1 + static_cast<int>(rng.below(2));
        for (int d = 0; d < distractors; ++d) {
          int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.n_classes - 1)));
          if (other >= c) ++other;
          ShapeInstance const s = random_shape(rng, other % 8, side);
          paint(img, side, s, instance_color(rng, other, config.n_classes), nullptr);
        }
        ShapeInstance const target = random_shape(rng, c % 8, side);
        paint(img, side, target, instance_color(rng, c, config.n_classes), &mask);
        double const fraction = mask.sum() / static_cast<double>(plane);
        if (fraction >= kMinForeground && fraction <= kMaxForeground) break;
      }

      ManifestEntry e{"images/" + entry_name(c, i, "ppm"), "masks/" + entry_name(c, i, "pgm"), c};
      write_image_ppm(out_dir / e.image, Tensor({3, side, side}, img));
      write_mask_pgm(out_dir / e.mask, Tensor({1, side, side}, mask));
      manifest.entries.push_back(std::move(e));
    }
  }
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

} // namespace msdnet
