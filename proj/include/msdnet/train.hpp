// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "msdnet/data.hpp"
#include "msdnet/metrics.hpp"
#include "msdnet/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace msdnet {

struct TrainConfig
{
  Scalar         lr = 1e-3;
  int            episodes_per_epoch = 200;
  int            epochs = 10;
  int            k_shot = 1;
  int            batch_episodes = 4;
  std::uint64_t  seed = 42;
  AblationConfig ablation;

  void validate() const;
};

/// Backbone features per manifest entry. Only valid for a frozen backbone,
/// whose features never change.
class FeatureCache
{
public:
  explicit FeatureCache(MsdNet const &model);

  FeatureBundle get(ImageStore const &store, std::size_t entry);

private:
  MsdNet const                         &model_;
  std::mutex                            mutex_;
  std::map<std::size_t, FeatureBundle> cache_;
};

/// Forward pass for one episode.
ModelOutput run_episode(MsdNet const &model, Episode const &episode, FeatureCache *cache, ImageStore const &store);

struct TrainResult
{
  std::vector<Scalar> batch_losses;
  std::vector<int>    train_classes;
  int                 empty_mask_warnings = 0;
};

using BatchCallback = std::function<void(long step, Scalar loss)>;

/// Episodic training on the fold's training classes: per batch, the mean
/// Dice loss of `batch_episodes` episodes drives one Adam step.
TrainResult train(MsdNet             &model,
                  TrainConfig const  &config,
                  ImageStore const   &store,
                  FoldSpec const     &fold,
                  BatchCallback const &on_batch = {});

struct Prediction
{
  Tensor mask; // binary [1,S,S]
  int    empty_masks = 0;
};

using Predictor = std::function<Prediction(Episode const &)>;

/// Binarized model prediction.
Predictor model_predictor(MsdNet const &model, ImageStore const &store, FeatureCache *cache = nullptr);
/// CMGM prior alone, resized to the image and thresholded at 0.
Predictor prior_predictor(MsdNet const &model, ImageStore const &store, FeatureCache *cache = nullptr);

struct EpisodeRecord
{
  std::uint64_t            seed = 0;
  int                      index = 0;
  int                      class_id = 0;
  std::size_t              query = 0;
  std::vector<std::size_t> support;
  Scalar                   iou = 0;
};

struct EvalOptions
{
  int                        n_episodes = 200;
  int                        k_shot = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int>           class_ids;
  int                        jobs = 1;
  std::filesystem::path      dump_masks; // empty: no dump
};

struct EvalReport
{
  std::vector<MetricsReport> per_seed;
  std::vector<EpisodeRecord> episodes;
  Scalar                     mean_miou = 0;
  Scalar                     mean_fb_iou = 0;
  std::map<int, Scalar>      mean_per_class_iou;
};

/// Runs `n_episodes` episodes per seed. Predictions are resized to each
/// query's original resolution before scoring.
EvalReport evaluate(Predictor const &predictor, ImageStore const &store, EvalOptions const &options);

/// Throws ProtocolError when an evaluation class was seen in training.
void check_disjoint(std::set<std::string> const &trained_class_names,
                    DatasetManifest const       &manifest,
                    std::vector<int> const      &eval_class_ids);

/// One row of the component ablation table.
struct AblationRow
{
  AblationConfig            ablation;
  std::string               label;
  Index                     params = 0;
  EvalReport                report;
  std::vector<Scalar>       losses;
  std::vector<std::uint8_t> checkpoint;
};

/// The eight component combinations in table order: baseline, +CMGM, +STD,
/// +MSD, +CMGM+STD, +CMGM+MSD, +STD+MSD, full.
std::vector<AblationConfig> ablation_grid();
std::string                 ablation_label(AblationConfig const &a);

} // namespace msdnet
