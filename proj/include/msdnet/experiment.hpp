// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/config.hpp"
#include "msdnet/train.hpp"

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

namespace msdnet {

/// Classes of `ids` that have at least k+1 images in the manifest.
std::vector<int> populated_classes(DatasetManifest const &manifest, std::vector<int> const &ids, int k);

/// Cross-dataset evaluation: removes every class whose name is in
/// `trained_names` from `manifest` and returns the ids of the classes left.
std::vector<int> exclude_trained(DatasetManifest &manifest, std::set<std::string> const &trained_names);

/// Trains one model on the fold's training classes and evaluates it on the
/// fold's test classes.
AblationRow run_variant(RunConfig const &config, AblationConfig const &ablation, ImageStore const &store,
                        EvalOptions const &eval);

/// Fixed-width text table and its JSON twin, one row per variant.
std::string    ablation_table_text(std::vector<AblationRow> const &rows);
nlohmann::json ablation_table_json(std::vector<AblationRow> const &rows, RunConfig const &config);

/// Tab-separated episode log: seed, index, class, query entry, support entries, IoU.
std::string episode_log(EvalReport const &report);

} // namespace msdnet
