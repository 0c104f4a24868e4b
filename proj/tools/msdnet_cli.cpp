// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/checkpoint.hpp"
#include "msdnet/config.hpp"
#include "msdnet/errors.hpp"
#include "msdnet/experiment.hpp"
#include "msdnet/image_io.hpp"
#include "msdnet/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace msdnet;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct Common
{
  std::string        config;
  std::optional<int> fold;
  std::optional<int> kshot;
  std::string        out;
  std::string        manifest;
};

void add_common(CLI::App *cmd, Common &c)
{
  cmd->add_option("--config", c.config, "JSON run configuration (defaults: reference tiny config)");
  cmd->add_option("--fold", c.fold, "Test fold id");
  cmd->add_option("--kshot", c.kshot, "Support shots per episode")->check(CLI::IsMember({1, 5}));
  cmd->add_option("--out", c.out, "Output directory (overrides output_dir)");
  cmd->add_option("--manifest", c.manifest, "Dataset manifest (overrides data.manifest)");
}

RunConfig resolve(Common const &c)
{
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.fold) cfg.fold.fold_id = *c.fold;
  if (c.kshot) cfg.train.k_shot = *c.kshot;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.manifest.empty()) cfg.manifest = c.manifest;
  if (char const *env = std::getenv("MSDNET_SEED")) {
    char *end = nullptr;
    auto  seed = std::strtoull(env, &end, 10);
    if (!*env || *end) throw ConfigError(std::string("MSDNET_SEED is not an unsigned integer: '") + env + "'");
    cfg.train.seed = seed;
  }
  cfg.validate();
  return cfg;
}

void write_text(fs::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

void make_dir(fs::path const &dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

std::vector<std::uint64_t> parse_seeds(std::string const &list)
{
  std::vector<std::uint64_t> out;
  std::size_t                pos = 0;
  while (pos <= list.size()) {
    std::size_t const next = std::min(list.find(',', pos), list.size());
    std::string const tok = list.substr(pos, next - pos);
    std::size_t       used = 0;
    try {
      out.push_back(std::stoull(tok, &used));
    } catch (std::exception const &) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw ConfigError("--seeds: bad seed '" + tok + "'");
    pos = next + 1;
  }
  return out;
}

int cmd_synth(fs::path const &out, SynthConfig const &config)
{
  DatasetManifest const m = synth_generate(out, config);
  std::cout << "wrote " << m.entries.size() << " image/mask pairs to " << out.string() << '\n';
  return kOk;
}

int cmd_train(RunConfig const &cfg)
{
  ImageStore const store(load_manifest(cfg.manifest), cfg.model.image_side());
  MsdNet           model(cfg.model_config());
  fs::path const   out = cfg.output_dir;
  make_dir(out);
  save_run_config(cfg, out / "resolved_config.json");

  std::ofstream log(out / "loss.log", std::ios::binary | std::ios::trunc);
  if (!log) throw IoError("cannot write '" + (out / "loss.log").string() + "'");
  log << "step\tloss\n";
  char line[64];
  auto on_batch = [&](long step, Scalar loss) {
    std::snprintf(line, sizeof line, "%ld\t%.17g\n", step, loss);
    log << line;
  };
  TrainResult const result = train(model, cfg.train, store, cfg.fold, on_batch);
  log.close();

  checkpoint_save(model.state(), out / "checkpoint.msdn");
  json names = json::array();
  for (int c : result.train_classes) names.push_back(store.manifest().class_names.at(c));
  write_text(out / "train_classes.json", json{{"classes", names}}.dump(2) + "\n");

  std::cout << "params " << param_count(model.state()) << ", " << result.batch_losses.size() << " steps, final loss "
            << (result.batch_losses.empty() ? 0.0 : result.batch_losses.back()) << '\n';
  if (result.empty_mask_warnings) std::cerr << "warning: " << result.empty_mask_warnings << " empty support masks\n";
  return kOk;
}

std::set<std::string> read_class_names(fs::path const &path)
{
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (json::parse_error const &e) {
    throw ParseError("'" + path.string() + "': " + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("classes") || !doc["classes"].is_array()) {
    throw ParseError("'" + path.string() + "': expected {\"classes\": [names]}", 0);
  }
  std::set<std::string> out;
  for (auto const &n : doc["classes"]) out.insert(n.get<std::string>());
  return out;
}

struct EvalFlags
{
  std::string checkpoint;
  int         episodes = 0;
  std::string seeds;
  std::string dump_masks;
  std::string exclude;
  int         jobs = 1;
};

int cmd_eval(RunConfig const &cfg, EvalFlags const &f)
{
  MsdNet model(cfg.model_config());
  model.load_state(checkpoint_load(f.checkpoint));

  DatasetManifest manifest = load_manifest(cfg.manifest);
  std::vector<int> ids;
  std::optional<std::set<std::string>> trained;
  if (!f.exclude.empty()) {
    trained = read_class_names(f.exclude);
    ids = exclude_trained(manifest, *trained);
  } else {
    ids = fold_split(static_cast<int>(manifest.class_names.size()), cfg.fold).test;
    fs::path const sidecar = fs::path(f.checkpoint).parent_path() / "train_classes.json";
    if (fs::exists(sidecar)) trained = read_class_names(sidecar);
  }
  ids = populated_classes(manifest, ids, cfg.train.k_shot);
  if (trained) check_disjoint(*trained, manifest, ids);

  ImageStore const store(std::move(manifest), cfg.model.image_side());
  EvalOptions      opts;
  opts.n_episodes = f.episodes > 0 ? f.episodes : cfg.eval_episodes;
  opts.k_shot = cfg.train.k_shot;
  opts.seeds = f.seeds.empty() ? cfg.eval_seeds : parse_seeds(f.seeds);
  opts.class_ids = ids;
  opts.jobs = f.jobs;
  opts.dump_masks = f.dump_masks;

  FeatureCache     cache(model);
  EvalReport const report = evaluate(model_predictor(model, store, &cache), store, opts);

  fs::path const out = cfg.output_dir;
  make_dir(out);
  write_text(out / "report.json", to_json(report, cfg, opts.k_shot).dump(2) + "\n");
  write_text(out / "episodes.tsv", episode_log(report));
  save_run_config(cfg, out / "resolved_config.json");
  std::printf("mIoU %.4f  FB-IoU %.4f  (%zu seeds x %d episodes)\n", report.mean_miou, report.mean_fb_iou,
              report.per_seed.size(), opts.n_episodes);
  return kOk;
}

int cmd_ablate(RunConfig const &cfg, std::string const &seeds, int jobs)
{
  ImageStore const store(load_manifest(cfg.manifest), cfg.model.image_side());
  EvalOptions      opts;
  opts.n_episodes = cfg.eval_episodes;
  opts.k_shot = cfg.train.k_shot;
  opts.seeds = seeds.empty() ? cfg.eval_seeds : parse_seeds(seeds);
  opts.jobs = jobs;

  fs::path const out = cfg.output_dir;
  make_dir(out);
  save_run_config(cfg, out / "resolved_config.json");
  std::vector<AblationRow> rows;
  for (AblationConfig const &a : ablation_grid()) {
    rows.push_back(run_variant(cfg, a, store, opts));
    std::printf("%-22s mIoU %.4f\n", rows.back().label.c_str(), rows.back().report.mean_miou);
    std::fflush(stdout);
  }
  std::string const text = ablation_table_text(rows);
  write_text(out / "ablation.txt", text);
  write_text(out / "ablation.json", ablation_table_json(rows, cfg).dump(2) + "\n");
  std::cout << text;
  return kOk;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Few-shot semantic segmentation with prototype priors and a multi-scale decoder"};
  app.require_subcommand(1);

  SynthConfig synth;
  std::string synth_out;
  auto       *s = app.add_subcommand("synth", "Generate the synthetic shapes dataset");
  s->add_option("--out", synth_out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--classes", synth.n_classes, "Number of classes");
  s->add_option("--per-class", synth.imgs_per_class, "Images per class");
  s->add_option("--side", synth.side, "Image side in pixels");

  Common tc;
  bool   no_cmgm = false, no_std = false, no_msd = false;
  std::optional<int> blocks;
  auto *t = app.add_subcommand("train", "Episodic training on the fold's training classes");
  add_common(t, tc);
  t->add_flag("--no-cmgm", no_cmgm, "Disable the similarity prior");
  t->add_flag("--no-std", no_std, "Disable the transformer decoder head");
  t->add_flag("--no-msd", no_msd, "Disable the multi-scale decoder");
  t->add_option("--blocks", blocks, "Residual blocks per decoder stage")->check(CLI::Range(1, 4));

  Common    ec;
  EvalFlags ef;
  auto     *e = app.add_subcommand("eval", "Evaluate a checkpoint on held-out classes");
  add_common(e, ec);
  e->add_option("--checkpoint", ef.checkpoint, "Checkpoint file")->required();
  e->add_option("--episodes", ef.episodes, "Episodes per seed");
  e->add_option("--seeds", ef.seeds, "Comma-separated evaluation seeds");
  e->add_option("--dump-masks", ef.dump_masks, "Directory for predicted PGM masks");
  e->add_option("--exclude-train-classes", ef.exclude, "train_classes.json whose classes are excluded");
  e->add_option("--jobs", ef.jobs, "Evaluation threads")->check(CLI::PositiveNumber);

  Common      ac;
  std::string ablate_seeds;
  int         ablate_jobs = 1;
  auto       *a = app.add_subcommand("ablate", "Train and evaluate all eight component combinations");
  add_common(a, ac);
  a->add_option("--seeds", ablate_seeds, "Comma-separated evaluation seeds");
  a->add_option("--jobs", ablate_jobs, "Evaluation threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &err) {
    int const code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth_out, synth);
    if (t->parsed()) {
      RunConfig cfg = resolve(tc);
      if (no_cmgm) cfg.train.ablation.use_cmgm = false;
      if (no_std) cfg.train.ablation.use_std = false;
      if (no_msd) cfg.train.ablation.use_msd = false;
      if (blocks) cfg.model.decoder.blocks_per_stage = *blocks;
      cfg.validate();
      return cmd_train(cfg);
    }
    if (e->parsed()) return cmd_eval(resolve(ec), ef);
    if (a->parsed()) return cmd_ablate(resolve(ac), ablate_seeds, ablate_jobs);
  } catch (NumericError const &err) {
    std::cerr << "numeric failure: " << err.what() << '\n';
    return kNumeric;
  } catch (ParseError const &err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return kIo;
  } catch (IoError const &err) {
    std::cerr << "io error: " << err.what() << '\n';
    return kIo;
  } catch (DimensionError const &err) {
    std::cerr << "shape mismatch: " << err.what() << '\n';
    return kIo;
  } catch (Error const &err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
