// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace msdnet {

struct ManifestEntry
{
  std::string image; // relative to the manifest directory
  std::string mask;
  int         class_id = 0;

  bool operator==(ManifestEntry const &) const = default;
};

/// Image/mask pairs with class labels. JSON layout:
///   {"classes": {"0": "disk", ...},
///    "entries": [{"image": "...", "mask": "...", "class": 0}, ...]}
struct DatasetManifest
{
  std::vector<ManifestEntry>  entries;
  std::map<int, std::string>  class_names;
  std::filesystem::path       root;

  std::filesystem::path resolve(std::string const &relative) const { return root / relative; }
  std::vector<int>      class_ids() const;
  std::vector<std::size_t> entries_of(int class_id) const;

  /// Structural equality (entries and class names); `root` is ignored.
  bool operator==(DatasetManifest const &other) const
  {
    return entries == other.entries && class_names == other.class_names;
  }
};

/// Loads a manifest. With `validate`, class ids must be dense from 0 and every
/// image and mask must exist, parse, and (for masks) contain foreground.
DatasetManifest load_manifest(std::filesystem::path const &path, bool validate = true);
void            save_manifest(DatasetManifest const &manifest, std::filesystem::path const &path);

/// Drops entries whose class is banned; class names are kept.
DatasetManifest exclude_classes(DatasetManifest const &manifest, std::set<int> const &banned);

struct FoldSpec
{
  int n_folds = 4;
  int fold_id = 0;
};

struct FoldClasses
{
  std::vector<int> train;
  std::vector<int> test;
};

/// Test classes are the contiguous block [fold_id*c, (fold_id+1)*c) with
/// c = n_classes / n_folds; training classes are the rest.
FoldClasses fold_split(int n_classes, FoldSpec const &fold);

/// Indices into the manifest chosen for one episode.
struct EpisodeDraw
{
  int                      class_id = 0;
  std::vector<std::size_t> support;
  std::size_t              query = 0;
};

/// Class-uniform draw of k+1 distinct images of one class; deterministic in `seed`.
EpisodeDraw draw_episode(DatasetManifest const &manifest, std::vector<int> const &class_ids, int k, std::uint64_t seed);

struct EpisodeImage
{
  Tensor      image; // [3,S,S]
  Tensor      mask;  // [1,S,S], binary
  std::size_t entry = 0;
};

struct Episode
{
  std::vector<EpisodeImage> support;
  EpisodeImage              query;
  Tensor                    query_mask_original; // ground truth at the file's resolution
  int                       class_id = 0;
  std::uint64_t             seed = 0;
};

/// Decoded images of a manifest resized to S x S, cached on first use.
class ImageStore
{
public:
  ImageStore(DatasetManifest manifest, Index side);

  DatasetManifest const &manifest() const { return manifest_; }
  Index                  side() const { return side_; }

  EpisodeImage load(std::size_t entry) const;
  Tensor       original_mask(std::size_t entry) const;
  Episode      episode(EpisodeDraw const &draw, std::uint64_t seed) const;

private:
  struct Cached
  {
    EpisodeImage resized;
    Tensor       original_mask;
  };
  Cached const &fetch(std::size_t entry) const;

  DatasetManifest                                         manifest_;
  Index                                                   side_;
  mutable std::mutex                                      mutex_;
  mutable std::map<std::size_t, std::unique_ptr<Cached>> cache_;
};

Episode sample_episode(ImageStore const &store, std::vector<int> const &class_ids, int k, std::uint64_t seed);
Episode sample_episode(DatasetManifest const &manifest, std::vector<int> const &class_ids, int k, std::uint64_t seed,
                       Index side);

/// Seed of the i-th episode of a stream: base XOR i.
inline std::uint64_t episode_seed(std::uint64_t base, std::uint64_t index) { return base ^ index; }

} // namespace msdnet
