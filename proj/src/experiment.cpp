// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/experiment.hpp"

#include "msdnet/checkpoint.hpp"
#include "msdnet/errors.hpp"

#include <cstdio>

namespace msdnet {

std::vector<int> populated_classes(DatasetManifest const &manifest, std::vector<int> const &ids, int k)
{
  std::vector<int> out;
  for (int c : ids) {
    if (manifest.entries_of(c).size() >= static_cast<std::size_t>(k) + 1) out.push_back(c);
  }
  return out;
}

std::vector<int> exclude_trained(DatasetManifest &manifest, std::set<std::string> const &trained_names)
{
  std::set<int>    banned;
  std::vector<int> kept;
  for (auto const &[id, name] : manifest.class_names) {
    if (trained_names.count(name)) {
      banned.insert(id);
    } else {
      kept.push_back(id);
    }
  }
  manifest = exclude_classes(manifest, banned);
  return kept;
}

AblationRow run_variant(RunConfig const &config, AblationConfig const &ablation, ImageStore const &store,
                        EvalOptions const &eval)
{
  RunConfig c = config;
  c.train.ablation = ablation;
  MsdNet model(c.model_config());

  AblationRow row;
  row.ablation = ablation;
  row.label = ablation_label(ablation);
  row.params = param_count(model.state());
  row.losses = train(model, c.train, store, c.fold).batch_losses;
  row.checkpoint = encode_checkpoint(model.state());

  EvalOptions opts = eval;
  if (opts.class_ids.empty()) {
    FoldClasses const split = fold_split(static_cast<int>(store.manifest().class_names.size()), c.fold);
    opts.class_ids = populated_classes(store.manifest(), split.test, opts.k_shot);
  }
  FeatureCache cache(model);
  row.report = evaluate(model_predictor(model, store, &cache), store, opts);
  return row;
}

std::string ablation_table_text(std::vector<AblationRow> const &rows)
{
  std::string out = "variant                 cmgm std msd    params    miou  fb_iou\n";
  char        line[160];
  for (auto const &r : rows) {
    std::snprintf(line, sizeof line, "%-22s  %4s %3s %3s %9lld  %.4f  %.4f\n", r.label.c_str(),
                  r.ablation.use_cmgm ? "y" : "-", r.ablation.use_std ? "y" : "-", r.ablation.use_msd ? "y" : "-",
                  static_cast<long long>(r.params), r.report.mean_miou, r.report.mean_fb_iou);
    out += line;
  }
  return out;
}

nlohmann::json ablation_table_json(std::vector<AblationRow> const &rows, RunConfig const &config)
{
  nlohmann::json list = nlohmann::json::array();
  for (auto const &r : rows) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (auto const &m : r.report.per_seed) per_seed.push_back({{"seed", m.seed}, {"miou", m.miou}, {"fb_iou", m.fb_iou}});
    list.push_back({{"variant", r.label},
                    {"use_cmgm", r.ablation.use_cmgm},
                    {"use_std", r.ablation.use_std},
                    {"use_msd", r.ablation.use_msd},
                    {"params", r.params},
                    {"miou", r.report.mean_miou},
                    {"fb_iou", r.report.mean_fb_iou},
                    {"per_seed", per_seed}});
  }
  return {{"schema_version", kReportSchemaVersion}, {"fold", config.fold.fold_id}, {"rows", list}};
}

std::string episode_log(EvalReport const &report)
{
  std::string out = "seed\tepisode\tclass\tquery\tsupport\tiou\n";
  char        buf[64];
  for (auto const &e : report.episodes) {
    out += std::to_string(e.seed) + '\t' + std::to_string(e.index) + '\t' + std::to_string(e.class_id) + '\t' +
           std::to_string(e.query) + '\t';
    for (std::size_t i = 0; i < e.support.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(e.support[i]);
    }
    std::snprintf(buf, sizeof buf, "\t%.17g\n", e.iou);
    out += buf;
  }
  return out;
}

} // namespace msdnet
