// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/data.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"
#include "msdnet/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace msdnet {

using nlohmann::json;

std::vector<int> DatasetManifest::class_ids() const
{
  std::vector<int> ids;
  for (auto const &[id, name] : class_names) ids.push_back(id);
  return ids;
}

std::vector<std::size_t> DatasetManifest::entries_of(int class_id) const
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].class_id == class_id) out.push_back(i);
  }
  return out;
}

DatasetManifest load_manifest(std::filesystem::path const &path, bool validate)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (json::parse_error const &e) {
    throw ParseError("manifest '" + path.string() + "': " + e.what(), e.byte);
  }

  DatasetManifest m;
  m.root = path.parent_path();
  try {
    for (auto const &[key, name] : doc.at("classes").items()) {
      std::size_t used = 0;
      int const   id = std::stoi(key, &used);
      if (used != key.size()) throw ConfigError("class key '" + key + "' is not an integer");
      m.class_names[id] = name.get<std::string>();
    }
    for (auto const &e : doc.at("entries")) {
      m.entries.push_back({e.at("image").get<std::string>(), e.at("mask").get<std::string>(), e.at("class").get<int>()});
    }
  } catch (json::exception const &e) {
    throw ConfigError("manifest '" + path.string() + "' is malformed: " + e.what());
  } catch (std::invalid_argument const &) {
    throw ConfigError("manifest '" + path.string() + "' has a non-integer class key");
  }

  if (validate) {
    int expected = 0;
    for (auto const &[id, name] : m.class_names) {
      if (id != expected++) throw ConfigError("manifest '" + path.string() + "': class ids must be dense from 0");
    }
    for (auto const &e : m.entries) {
      if (!m.class_names.count(e.class_id)) {
        throw ConfigError("manifest entry '" + e.image + "' has unknown class " + std::to_string(e.class_id));
      }
      Tensor const image = read_image_ppm(m.resolve(e.image));
      Tensor const mask = read_mask_pgm(m.resolve(e.mask));
      if (image.dim(1) != mask.dim(1) || image.dim(2) != mask.dim(2)) {
        throw ConfigError("image '" + e.image + "' and mask '" + e.mask + "' differ in size");
      }
      if (mask.values().sum() == 0) throw ConfigError("mask '" + e.mask + "' has no foreground pixel");
    }
  }
  return m;
}

void save_manifest(DatasetManifest const &manifest, std::filesystem::path const &path)
{
  json doc;
  doc["classes"] = json::object();
  for (auto const &[id, name] : manifest.class_names) doc["classes"][std::to_string(id)] = name;
  doc["entries"] = json::array();
  for (auto const &e : manifest.entries) doc["entries"].push_back({{"image", e.image}, {"mask", e.mask}, {"class", e.class_id}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for manifest '" + path.string() + "'");
}

DatasetManifest exclude_classes(DatasetManifest const &manifest, std::set<int> const &banned)
{
  DatasetManifest out;
  out.root = manifest.root;
  out.class_names = manifest.class_names;
  std::copy_if(manifest.entries.begin(), manifest.entries.end(), std::back_inserter(out.entries),
               [&](ManifestEntry const &e) { return !banned.count(e.class_id); });
  return out;
}

FoldClasses fold_split(int n_classes, FoldSpec const &fold)
{
  if (fold.n_folds <= 0 || n_classes <= 0) throw ArgumentError("fold_split: class and fold counts must be positive");
  if (n_classes % fold.n_folds != 0) {
    throw ArgumentError("fold_split: " + std::to_string(n_classes) + " classes do not divide into " +
                        std::to_string(fold.n_folds) + " folds");
  }
  if (fold.fold_id < 0 || fold.fold_id >= fold.n_folds) {
    throw ArgumentError("fold_split: fold id " + std::to_string(fold.fold_id) + " out of range");
  }
  int const   per_fold = n_classes / fold.n_folds;
  FoldClasses out;
  for (int c = 0; c < n_classes; ++c) {
    bool const test = c >= fold.fold_id * per_fold && c < (fold.fold_id + 1) * per_fold;
    (test ? out.test : out.train).push_back(c);
  }
  return out;
}

EpisodeDraw draw_episode(DatasetManifest const &manifest, std::vector<int> const &class_ids, int k, std::uint64_t seed)
{
  if (k < 1) throw ArgumentError("draw_episode: k must be at least 1");
  if (class_ids.empty()) throw SamplingError("draw_episode: no classes to sample from");
  std::vector<std::vector<std::size_t>> pools;
  for (int c : class_ids) {
    pools.push_back(manifest.entries_of(c));
    if (pools.back().size() < static_cast<std::size_t>(k + 1)) {
      std::string const name = manifest.class_names.count(c) ? " (" + manifest.class_names.at(c) + ")" : "";
      throw SamplingError("class " + std::to_string(c) + name + " has " + std::to_string(pools.back().size()) +
                          " images; " + std::to_string(k + 1) + " needed for a " + std::to_string(k) + "-shot episode");
    }
  }

  SplitMix64  rng(mix64(seed));
  std::size_t const which = rng.below(class_ids.size());
  auto             &pool = pools[which];
  // Partial Fisher-Yates: the first k+1 slots become the draw.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k + 1); ++i) {
    std::size_t const j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  EpisodeDraw d;
  d.class_id = class_ids[which];
  d.support.assign(pool.begin(), pool.begin() + k);
  d.query = pool[static_cast<std::size_t>(k)];
  return d;
}

ImageStore::ImageStore(DatasetManifest manifest, Index side)
  : manifest_(std::move(manifest))
  , side_(side)
{
  if (side_ <= 0) throw ArgumentError("image side must be positive");
}

ImageStore::Cached const &ImageStore::fetch(std::size_t entry) const
{
  std::lock_guard lock(mutex_);
  auto            it = cache_.find(entry);
  if (it != cache_.end()) return *it->second;
  if (entry >= manifest_.entries.size()) throw ArgumentError("entry index out of range");
  auto const &e = manifest_.entries[entry];
  auto        c = std::make_unique<Cached>();
  Tensor const image = read_image_ppm(manifest_.resolve(e.image));
  c->original_mask = read_mask_pgm(manifest_.resolve(e.mask));
  c->resized.image = resize_bilinear(image, side_, side_);
  c->resized.mask = resize_nearest(c->original_mask, side_, side_);
  c->resized.entry = entry;
  return *cache_.emplace(entry, std::move(c)).first->second;
}

EpisodeImage ImageStore::load(std::size_t entry) const { return fetch(entry).resized; }
Tensor       ImageStore::original_mask(std::size_t entry) const { return fetch(entry).original_mask; }

Episode ImageStore::episode(EpisodeDraw const &draw, std::uint64_t seed) const
{
  Episode ep;
  for (std::size_t s : draw.support) ep.support.push_back(load(s));
  ep.query = load(draw.query);
  ep.query_mask_original = original_mask(draw.query);
  ep.class_id = draw.class_id;
  ep.seed = seed;
  return ep;
}

Episode sample_episode(ImageStore const &store, std::vector<int> const &class_ids, int k, std::uint64_t seed)
{
  return store.episode(draw_episode(store.manifest(), class_ids, k, seed), seed);
}

Episode sample_episode(DatasetManifest const &manifest, std::vector<int> const &class_ids, int k, std::uint64_t seed,
                       Index side)
{
  ImageStore store(manifest, side);
  return sample_episode(store, class_ids, k, seed);
}

} // namespace msdnet
