// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/data.hpp"
#include "msdnet/model.hpp"
#include "msdnet/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace msdnet {

inline constexpr int kReportSchemaVersion = 1;

/// Everything a CLI run needs. JSON sections: backbone, decoder, std, train,
/// fold, eval, data, output_dir. Unknown keys are rejected; missing keys take
/// the defaults below (the reference tiny configuration).
struct RunConfig
{
  ModelConfig                model;
  TrainConfig                train;
  FoldSpec                   fold;
  int                        eval_episodes = 200;
  std::vector<std::uint64_t> eval_seeds{1, 2, 3};
  std::string                manifest = "data/synth/manifest.json";
  std::string                output_dir = "runs/default";

  /// Model configuration with the training seed and ablation switches applied.
  ModelConfig model_config() const;
  void        validate() const;
};

nlohmann::json to_json(RunConfig const &config);
RunConfig      run_config_from_json(nlohmann::json const &doc);
RunConfig      load_run_config(std::filesystem::path const &path);
void           save_run_config(RunConfig const &config, std::filesystem::path const &path);

nlohmann::json to_json(EvalReport const &report, RunConfig const &config, int k_shot);

} // namespace msdnet
