// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/train.hpp"

#include "msdnet/errors.hpp"
#include "msdnet/image_io.hpp"
#include "msdnet/ops.hpp"
#include "msdnet/optim.hpp"
#include "msdnet/random.hpp"

#include <algorithm>
#include <cstdio>
#include <thread>

namespace msdnet {

void TrainConfig::validate() const
{
  if (!(lr > 0)) throw ConfigError("train.lr must be positive");
  if (k_shot != 1 && k_shot != 5) throw ConfigError("train.k_shot must be 1 or 5, got " + std::to_string(k_shot));
  if (episodes_per_epoch < 1 || epochs < 0 || batch_episodes < 1) {
    throw ConfigError("train: episode, epoch and batch counts must be positive");
  }
}

FeatureCache::FeatureCache(MsdNet const &model)
  : model_(model)
{
}

FeatureBundle FeatureCache::get(ImageStore const &store, std::size_t entry)
{
  {
    std::lock_guard lock(mutex_);
    auto            it = cache_.find(entry);
    if (it != cache_.end()) return it->second;
  }
  FeatureBundle   f = model_.features(store.load(entry).image);
  std::lock_guard lock(mutex_);
  return cache_.emplace(entry, std::move(f)).first->second;
}

namespace {

struct EpisodeInputs
{
  std::vector<FeatureBundle> support;
  std::vector<Tensor>        masks;
  FeatureBundle              query;
};

EpisodeInputs gather(MsdNet const &model, Episode const &episode, FeatureCache *cache, ImageStore const &store)
{
  bool const    cached = cache && model.config().backbone.frozen;
  EpisodeInputs in;
  for (auto const &s : episode.support) {
    in.support.push_back(cached ? cache->get(store, s.entry) : model.features(s.image));
    in.masks.push_back(s.mask);
  }
  in.query = cached ? cache->get(store, episode.query.entry) : model.features(episode.query.image);
  return in;
}

} // namespace

ModelOutput run_episode(MsdNet const &model, Episode const &episode, FeatureCache *cache, ImageStore const &store)
{
  EpisodeInputs const in = gather(model, episode, cache, store);
  return model.forward(in.support, in.masks, in.query);
}

TrainResult train(MsdNet &model, TrainConfig const &config, ImageStore const &store, FoldSpec const &fold,
                  BatchCallback const &on_batch)
{
  config.validate();
  if (!(config.ablation == model.config().ablation)) {
    throw ConfigError("train: ablation switches differ from the model's configuration");
  }
  FoldClasses const split = fold_split(static_cast<int>(store.manifest().class_names.size()), fold);
  std::vector<int>  classes;
  for (int c : split.train) {
    if (!store.manifest().entries_of(c).empty()) classes.push_back(c);
  }
  if (classes.empty()) throw ConfigError("train: the fold leaves no populated training class");

  TrainResult result;
  result.train_classes = classes;

  FeatureCache cache(model);
  Adam         adam(model.state(), AdamConfig{config.lr});
  auto const   params = adam.params();

  long const total = static_cast<long>(config.epochs) * config.episodes_per_epoch;
  long       episode_index = 0;
  long       step = 0;
  while (episode_index < total) {
    long const          batch = std::min<long>(config.batch_episodes, total - episode_index);
    std::vector<Vector> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) grads[i] = Vector::Zero(params[i].numel());
    Scalar batch_loss = 0;
    for (long b = 0; b < batch; ++b, ++episode_index) {
      std::uint64_t const seed = derive_seed(config.seed, static_cast<std::uint64_t>(episode_index));
      Episode const       episode = sample_episode(store, classes, config.k_shot, seed);
      Tape                tape;
      Tensor              loss;
      {
        TapeScope         scope(tape);
        ModelOutput const out = run_episode(model, episode, &cache, store);
        result.empty_mask_warnings += out.empty_masks;
        loss = scale(dice_loss(out.probabilities, episode.query.mask), 1.0 / static_cast<Scalar>(batch));
      }
      batch_loss += loss.item();
      Gradients const g = tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (g.contains(params[i])) grads[i] += g.of(params[i]).values();
      }
    }
    adam.step(grads);
    ++step;
    result.batch_losses.push_back(batch_loss);
    if (on_batch) on_batch(step, batch_loss);
  }
  return result;
}

Predictor model_predictor(MsdNet const &model, ImageStore const &store, FeatureCache *cache)
{
  return [&model, &store, cache](Episode const &episode) {
    NoGradScope       guard;
    ModelOutput const out = run_episode(model, episode, cache, store);
    return Prediction{binarize(out.logits), out.empty_masks};
  };
}

Predictor prior_predictor(MsdNet const &model, ImageStore const &store, FeatureCache *cache)
{
  return [&model, &store, cache](Episode const &episode) {
    NoGradScope         guard;
    EpisodeInputs const in = gather(model, episode, cache, store);
    PriorMap const      prior = model.prior(in.support, in.masks, in.query);
    Index const         side = model.config().image_side();
    Tensor const        up = bilinear_upsample(prior.map, static_cast<int>(side / prior.map.dim(1)));
    int                 empty = 0;
    for (auto const &m : in.masks) {
      Index const r = model.config().backbone.feature_res;
      if (resize_nearest(m, r, r).values().sum() == 0) ++empty;
    }
    return Prediction{binarize(up), empty};
  };
}

EvalReport evaluate(Predictor const &predictor, ImageStore const &store, EvalOptions const &options)
{
  if (options.n_episodes < 1) throw ArgumentError("evaluate: need at least one episode");
  if (options.seeds.empty()) throw ArgumentError("evaluate: need at least one seed");
  if (options.class_ids.empty()) throw ArgumentError("evaluate: no evaluation classes");
  if (!options.dump_masks.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(options.dump_masks, ec);
    if (ec) throw IoError("cannot create '" + options.dump_masks.string() + "': " + ec.message());
  }

  EvalReport report;
  for (std::uint64_t seed : options.seeds) {
    std::size_t const          n = static_cast<std::size_t>(options.n_episodes);
    std::vector<EpisodeRecord> records(n);
    std::vector<Confusion>     conf(n);
    std::vector<int>           empties(n, 0);

    auto work = [&](std::size_t i) {
      std::uint64_t const ep_seed = episode_seed(mix64(seed), i);
      EpisodeDraw const   draw = draw_episode(store.manifest(), options.class_ids, options.k_shot, ep_seed);
      Episode const       episode = store.episode(draw, ep_seed);
      Prediction const    pred = predictor(episode);
      Tensor const        gt = episode.query_mask_original;
      Tensor const        mask = resize_nearest(pred.mask, gt.dim(1), gt.dim(2));
      conf[i] = confusion(mask, gt);
      empties[i] = pred.empty_masks;
      records[i] = {seed, static_cast<int>(i), draw.class_id, draw.query, draw.support, conf[i].foreground_iou()};
      if (!options.dump_masks.empty()) {
        char name[64];
        std::snprintf(name, sizeof name, "seed%llu_ep%04zu.pgm", static_cast<unsigned long long>(seed), i);
        write_mask_pgm(options.dump_masks / name, mask);
      }
    };

    int const jobs = std::max(1, std::min<int>(options.jobs, options.n_episodes));
    if (jobs == 1) {
      for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
      std::vector<std::thread>        pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
      for (int j = 0; j < jobs; ++j) {
        pool.emplace_back([&, j] {
          try {
            for (std::size_t i = static_cast<std::size_t>(j); i < n; i += static_cast<std::size_t>(jobs)) work(i);
          } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
          }
        });
      }
      for (auto &t : pool) t.join();
      for (auto &e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    std::vector<std::pair<int, Scalar>> per_episode;
    Confusion                           pooled;
    MetricsReport                       m;
    for (std::size_t i = 0; i < n; ++i) {
      per_episode.emplace_back(records[i].class_id, records[i].iou);
      pooled += conf[i];
      m.empty_mask_warnings += empties[i];
    }
    MiouSummary const summary = compute_miou(per_episode);
    m.per_class_iou = summary.per_class_iou;
    m.miou = summary.miou;
    m.fb_iou = fb_iou(pooled);
    m.n_episodes = options.n_episodes;
    m.seed = seed;
    report.per_seed.push_back(m);
    report.episodes.insert(report.episodes.end(), records.begin(), records.end());
  }

  Scalar const k = static_cast<Scalar>(report.per_seed.size());
  std::map<int, std::pair<Scalar, int>> per_class;
  for (auto const &m : report.per_seed) {
    report.mean_miou += m.miou / k;
    report.mean_fb_iou += m.fb_iou / k;
    for (auto const &[c, v] : m.per_class_iou) {
      per_class[c].first += v;
      per_class[c].second += 1;
    }
  }
  for (auto const &[c, acc] : per_class) report.mean_per_class_iou[c] = acc.first / acc.second;
  return report;
}

void check_disjoint(std::set<std::string> const &trained_class_names,
                    DatasetManifest const       &manifest,
                    std::vector<int> const      &eval_class_ids)
{
  for (int c : eval_class_ids) {
    auto it = manifest.class_names.find(c);
    if (it != manifest.class_names.end() && trained_class_names.count(it->second)) {
      throw ProtocolError("evaluation class " + std::to_string(c) + " (" + it->second +
                          ") was seen during training");
    }
  }
}

std::vector<AblationConfig> ablation_grid()
{
  return {
    {false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
    {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true},
  };
}

std::string ablation_label(AblationConfig const &a)
{
  std::string s = "baseline";
  if (a.use_cmgm) s += "+cmgm";
  if (a.use_std) s += "+std";
  if (a.use_msd) s += "+msd";
  return s;
}

} // namespace msdnet
