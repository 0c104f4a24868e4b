// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/config.hpp"

#include "msdnet/checkpoint.hpp"
#include "msdnet/errors.hpp"

#include <fstream>
#include <set>

namespace msdnet {

using nlohmann::json;

namespace {

json ablation_json(AblationConfig const &a)
{
  return {{"use_cmgm", a.use_cmgm}, {"use_std", a.use_std}, {"use_msd", a.use_msd}};
}

// Visits the keys of `node` (which must be an object), rejecting any not in `allowed`.
json const &section(json const &node, std::string const &path, std::set<std::string> const &allowed)
{
  if (!node.is_object()) throw ConfigError("config: '" + path + "' must be an object");
  for (auto const &[key, value] : node.items()) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + (path.empty() ? key : path + "." + key) + "'");
  }
  return node;
}

template <typename T>
void read(json const &node, std::string const &key, std::string const &path, T &out)
{
  auto it = node.find(key);
  if (it == node.end()) return;
  try {
    out = it->template get<T>();
  } catch (json::exception const &) {
    throw ConfigError("config: '" + path + "." + key + "' has the wrong type");
  }
}

void read_ablation(json const &node, std::string const &path, AblationConfig &a)
{
  section(node, path, {"use_cmgm", "use_std", "use_msd"});
  read(node, "use_cmgm", path, a.use_cmgm);
  read(node, "use_std", path, a.use_std);
  read(node, "use_msd", path, a.use_msd);
}

} // namespace

ModelConfig RunConfig::model_config() const
{
  ModelConfig m = model;
  m.seed = train.seed;
  m.ablation = train.ablation;
  m.resolve();
  return m;
}

void RunConfig::validate() const
{
  model_config();
  train.validate();
  if (fold.n_folds < 1 || fold.fold_id < 0 || fold.fold_id >= fold.n_folds) {
    throw ConfigError("fold: fold_id must lie in [0, n_folds)");
  }
  if (eval_episodes < 1) throw ConfigError("eval.episodes must be positive");
  if (eval_seeds.empty()) throw ConfigError("eval.seeds must not be empty");
}

json to_json(RunConfig const &c)
{
  auto const &b = c.model.backbone;
  auto const &d = c.model.decoder;
  return {
    {"backbone",
     {{"in_channels", b.in_channels},
      {"stem_channels", b.stem_channels},
      {"stage_channels", b.stage_channels},
      {"feature_res", b.feature_res},
      {"merged_channels", b.merged_channels},
      {"frozen", b.frozen},
      {"seed", b.seed}}},
    {"decoder", {{"stage_channels", d.stage_channels}, {"blocks_per_stage", d.blocks_per_stage}}},
    {"std", {{"model_dim", c.model.std.model_dim}, {"heads", c.model.std.heads}}},
    {"train",
     {{"lr", c.train.lr},
      {"episodes_per_epoch", c.train.episodes_per_epoch},
      {"epochs", c.train.epochs},
      {"k_shot", c.train.k_shot},
      {"batch_episodes", c.train.batch_episodes},
      {"seed", c.train.seed},
      {"ablation", ablation_json(c.train.ablation)}}},
    {"fold", {{"n_folds", c.fold.n_folds}, {"fold_id", c.fold.fold_id}}},
    {"eval", {{"episodes", c.eval_episodes}, {"seeds", c.eval_seeds}}},
    {"data", {{"manifest", c.manifest}}},
    {"output_dir", c.output_dir},
  };
}

RunConfig run_config_from_json(json const &doc)
{
  RunConfig c;
  section(doc, "", {"backbone", "decoder", "std", "train", "fold", "eval", "data", "output_dir"});
  if (auto it = doc.find("backbone"); it != doc.end()) {
    auto &b = c.model.backbone;
    section(*it, "backbone",
            {"in_channels", "stem_channels", "stage_channels", "feature_res", "merged_channels", "frozen", "seed"});
    read(*it, "in_channels", "backbone", b.in_channels);
    read(*it, "stem_channels", "backbone", b.stem_channels);
    read(*it, "stage_channels", "backbone", b.stage_channels);
    read(*it, "feature_res", "backbone", b.feature_res);
    read(*it, "merged_channels", "backbone", b.merged_channels);
    read(*it, "frozen", "backbone", b.frozen);
    read(*it, "seed", "backbone", b.seed);
  }
  if (auto it = doc.find("decoder"); it != doc.end()) {
    section(*it, "decoder", {"stage_channels", "blocks_per_stage"});
    read(*it, "stage_channels", "decoder", c.model.decoder.stage_channels);
    read(*it, "blocks_per_stage", "decoder", c.model.decoder.blocks_per_stage);
  }
  if (auto it = doc.find("std"); it != doc.end()) {
    section(*it, "std", {"model_dim", "heads"});
    read(*it, "model_dim", "std", c.model.std.model_dim);
    read(*it, "heads", "std", c.model.std.heads);
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    auto &t = c.train;
    section(*it, "train", {"lr", "episodes_per_epoch", "epochs", "k_shot", "batch_episodes", "seed", "ablation"});
    read(*it, "lr", "train", t.lr);
    read(*it, "episodes_per_epoch", "train", t.episodes_per_epoch);
    read(*it, "epochs", "train", t.epochs);
    read(*it, "k_shot", "train", t.k_shot);
    read(*it, "batch_episodes", "train", t.batch_episodes);
    read(*it, "seed", "train", t.seed);
    if (auto a = it->find("ablation"); a != it->end()) read_ablation(*a, "train.ablation", t.ablation);
  }
  if (auto it = doc.find("fold"); it != doc.end()) {
    section(*it, "fold", {"n_folds", "fold_id"});
    read(*it, "n_folds", "fold", c.fold.n_folds);
    read(*it, "fold_id", "fold", c.fold.fold_id);
  }
  if (auto it = doc.find("eval"); it != doc.end()) {
    section(*it, "eval", {"episodes", "seeds"});
    read(*it, "episodes", "eval", c.eval_episodes);
    read(*it, "seeds", "eval", c.eval_seeds);
  }
  if (auto it = doc.find("data"); it != doc.end()) {
    section(*it, "data", {"manifest"});
    read(*it, "manifest", "data", c.manifest);
  }
  if (auto it = doc.find("output_dir"); it != doc.end()) {
    if (!it->is_string()) throw ConfigError("config: 'output_dir' must be a string");
    c.output_dir = it->get<std::string>();
  }
  c.validate();
  return c;
}

RunConfig load_run_config(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (json::parse_error const &e) {
    throw ParseError("config '" + path.string() + "': " + e.what(), e.byte);
  }
  return run_config_from_json(doc);
}

void save_run_config(RunConfig const &config, std::filesystem::path const &path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_json(config).dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json to_json(EvalReport const &report, RunConfig const &config, int k_shot)
{
  auto per_class = [](std::map<int, Scalar> const &m) {
    json o = json::object();
    for (auto const &[c, v] : m) o[std::to_string(c)] = v;
    return o;
  };
  json seeds = json::array();
  json per_seed = json::array();
  for (auto const &m : report.per_seed) {
    seeds.push_back(m.seed);
    per_seed.push_back({{"seed", m.seed},
                        {"miou", m.miou},
                        {"fb_iou", m.fb_iou},
                        {"per_class_iou", per_class(m.per_class_iou)},
                        {"n_episodes", m.n_episodes},
                        {"empty_mask_warnings", m.empty_mask_warnings}});
  }
  return {
    {"schema_version", kReportSchemaVersion},
    {"checkpoint_version", kCheckpointVersion},
    {"fold", config.fold.fold_id},
    {"n_folds", config.fold.n_folds},
    {"k_shot", k_shot},
    {"seeds", seeds},
    {"miou", report.mean_miou},
    {"fb_iou", report.mean_fb_iou},
    {"per_class_iou", per_class(report.mean_per_class_iou)},
    {"per_seed", per_seed},
  };
}

} // namespace msdnet
