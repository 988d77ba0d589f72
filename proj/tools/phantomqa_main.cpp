#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "phantomqa/checkpoint.hpp"
#include "phantomqa/config.hpp"
#include "phantomqa/dataset_io.hpp"
#include "phantomqa/errors.hpp"
#include "phantomqa/experiments.hpp"
#include "phantomqa/proxy.hpp"
#include "phantomqa/simulate.hpp"
#include "phantomqa/train.hpp"

namespace {

using namespace phantomqa;

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  binio::write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return j;
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
  if (args.seed_set) cfg.master_seed = args.seed;
  cfg.validate();
  return cfg;
}

int cmd_gen(const CommonArgs& common, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(common);
  std::printf("generating splits (seed %llu)...\n",
              static_cast<unsigned long long>(cfg.master_seed));
  const SplitSet splits = make_splits(cfg.phantom, cfg.acquisition, cfg.master_seed);
  save_dataset(out_dir, splits);
  const auto count = [](const std::vector<LabeledSeries>& v) {
    std::size_t n = 0;
    for (const auto& s : v) n += s.slices.size();
    return n;
  };
  std::printf("wrote %s: train %zu series / %zu slices, val %zu/%zu, test %zu/%zu, "
              "extreme %zu/%zu\n",
              out_dir.c_str(), splits.train.size(), count(splits.train), splits.val.size(),
              count(splits.val), splits.test.size(), count(splits.test), splits.extreme.size(),
              count(splits.extreme));
  return kExitOk;
}

struct TrainOverrides {
  int np = 0;
  int freeze = -1;
  std::string init;
  std::string input;
  bool no_augment = false;
};

int cmd_train(const CommonArgs& common, const std::string& data_dir, const std::string& out_dir,
              const TrainOverrides& ov) {
  RunConfig cfg = resolve_config(common);
  if (ov.np > 0) cfg.model.head_width = ov.np;
  if (ov.freeze >= 0) cfg.freeze_layers = ov.freeze;
  if (!ov.init.empty()) cfg.init_mode = ov.init;
  if (!ov.input.empty()) cfg.train.stack = stack_mode_from_string(ov.input);
  if (ov.no_augment) cfg.train.augment = false;
  cfg.validate();

  const SplitSet splits = load_dataset(data_dir);
  std::vector<ProcessedSeries> train_series, val_series, test_series, extreme_series;
  int id = 0;
  for (const auto& s : splits.train) train_series.push_back(preprocess_series(s, cfg.working_px, id++));
  for (const auto& s : splits.val) val_series.push_back(preprocess_series(s, cfg.working_px, id++));
  for (const auto& s : splits.test) test_series.push_back(preprocess_series(s, cfg.working_px, id++));
  for (const auto& s : splits.extreme) extreme_series.push_back(preprocess_series(s, cfg.working_px, id++));

  const Dataset train_set = assemble_dataset(train_series, cfg.train.stack);
  const Dataset val_set = assemble_dataset(val_series, cfg.train.stack);
  const Dataset test_set = assemble_dataset(test_series, cfg.train.stack);
  const Dataset extreme_set = assemble_dataset(extreme_series, cfg.train.stack);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  RngState master(cfg.master_seed);
  Model model(cfg.model, init_mode_from_string(cfg.init_mode), master.substream(10).seed());
  if (cfg.init_mode == "proxy") {
    std::printf("pretraining donor conv stack (%d epochs)...\n", cfg.proxy.epochs);
    ProxyResult proxy = pretrain_proxy(cfg.model, cfg.proxy);
    std::printf("proxy val accuracy %.4f\n", proxy.val_acc);
    save_checkpoint(std::filesystem::path(out_dir) / "donor.pckp", proxy.donor);
    transfer_conv_stack(model, proxy.donor);
  }
  model.freeze_layers(cfg.freeze_layers);
  if (cfg.freeze_layers > 0) {
    std::string names;
    for (const std::string& n : model.frozen_conv_layers()) {
      if (!names.empty()) names += ", ";
      names += n;
    }
    std::printf("frozen conv layers (%d): %s\n", model.frozen_layers(), names.c_str());
  }

  TrainConfig tc = cfg.train;
  tc.seed = master.substream(11).seed();
  std::printf("training %d epochs on %zu samples (%s stack, augment %s)\n", tc.epochs,
              train_set.samples.size(), to_string(tc.stack), tc.augment ? "on" : "off");
  const std::vector<EpochLog> logs =
      train(model, train_set, val_set, tc, [](const EpochLog& e) {
        std::printf("epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", e.epoch,
                    e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        std::fflush(stdout);
      });

  const EvalReport val = evaluate(model, val_set);
  const EvalReport test = evaluate(model, test_set);
  const EvalReport extreme = evaluate(model, extreme_set);

  const std::filesystem::path out(out_dir);
  save_checkpoint(out / "checkpoint.pckp", checkpoint_from_model(model));
  write_json_file(out / "epochs.json", nlohmann::json(logs));
  write_json_file(out / "eval_val.json", nlohmann::json(val));
  write_json_file(out / "eval_test.json", nlohmann::json(test));
  write_json_file(out / "eval_extreme.json", nlohmann::json(extreme));

  std::printf("\nvalidation split\n%s", render_report(val).c_str());
  std::printf("\ntest split\n%s", render_report(test).c_str());
  std::printf("\nwrote %s\n", (out / "checkpoint.pckp").string().c_str());
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& split, const std::string& input, int working_px,
             const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Model model = model_from_checkpoint(ckpt);

  const SplitSet splits = load_dataset(data_dir);
  const std::vector<LabeledSeries>* series = nullptr;
  if (split == "train") series = &splits.train;
  else if (split == "val") series = &splits.val;
  else if (split == "test") series = &splits.test;
  else if (split == "extreme") series = &splits.extreme;
  else throw ConfigError("unknown split '" + split + "' (train, val, test or extreme)");
  if (series->empty()) throw ConfigError("split '" + split + "' holds no series");

  std::vector<ProcessedSeries> processed;
  int id = 0;
  for (const auto& s : *series) {
    processed.push_back(preprocess_series(s, working_px, id++));
  }
  const Dataset set = assemble_dataset(processed, stack_mode_from_string(input));
  const EvalReport report = evaluate(model, set);
  std::printf("%s split, %zu slices\n%s", split.c_str(), set.samples.size(),
              render_report(report).c_str());
  if (!out_path.empty()) {
    write_json_file(out_path, nlohmann::json(report));
    std::printf("wrote %s\n", out_path.c_str());
  }
  return kExitOk;
}

int cmd_ablate(const CommonArgs& common, const std::string& data_dir,
               const std::string& out_dir, bool verbose) {
  const RunConfig cfg = resolve_config(common);
  const SplitSet splits = load_dataset(data_dir);
  const AblationOutcome outcome = run_experiments(cfg, splits, out_dir, verbose);
  std::printf("%s", outcome.table.c_str());
  std::printf("\nwrote %s\n", (std::filesystem::path(out_dir) / "table.txt").string().c_str());
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  const nlohmann::json summary = read_json_file(std::filesystem::path(dir) / "summary.json");
  std::vector<ScenarioResult> results;
  try {
    for (const nlohmann::json& row : summary) {
      ScenarioResult r;
      r.name = row.at("name").get<std::string>();
      r.val = row.at("val").get<EvalReport>();
      r.test = row.at("test").get<EvalReport>();
      r.extreme = row.at("extreme").get<EvalReport>();
      r.agp_misread_as_usable = row.at("agp_misread_as_usable").get<std::int64_t>();
      r.epochs = row.at("epochs").get<std::vector<EpochLog>>();
      results.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir + "/summary.json: " + e.what());
  }
  std::printf("%s", render_ablation_table(results).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phantom slice-series synthesis, training and evaluation"};
  app.require_subcommand(1);

  CommonArgs common;
  TrainOverrides ov;
  std::string data_dir, out_dir, ckpt_path, split = "test", input = "axial", out_path, dir;
  int working_px = 64;
  bool verbose = false;

  CLI::App* gen = app.add_subcommand("gen", "synthesize a labeled slice dataset");
  gen->add_option("--config", common.config_path, "JSON config file");
  gen->add_option("--seed", common.seed, "master seed override")
      ->each([&](const std::string&) { common.seed_set = true; });
  gen->add_option("--out", out_dir, "output dataset directory")->required();

  CLI::App* tr = app.add_subcommand("train", "train a classifier on a dataset");
  tr->add_option("--config", common.config_path, "JSON config file");
  tr->add_option("--seed", common.seed, "master seed override")
      ->each([&](const std::string&) { common.seed_set = true; });
  tr->add_option("--data", data_dir, "dataset directory (from gen)")->required();
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--np", ov.np, "head width override");
  tr->add_option("--freeze", ov.freeze, "freeze the first K conv layers")
      ->check(CLI::Range(0, 64));
  tr->add_option("--init", ov.init, "initialization: proxy, he or normal")
      ->check(CLI::IsMember({"proxy", "he", "normal"}));
  tr->add_option("--input", ov.input, "channel stacking: axial or triplicate")
      ->check(CLI::IsMember({"axial", "triplicate"}));
  tr->add_flag("--no-augment", ov.no_augment, "disable training-time augmentation");

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--split", split, "train, val, test or extreme");
  ev->add_option("--input", input, "channel stacking: axial or triplicate")
      ->check(CLI::IsMember({"axial", "triplicate"}));
  ev->add_option("--working-px", working_px, "preprocessing size (must match training)");
  ev->add_option("--out", out_path, "also write the report as JSON here");

  CLI::App* ab = app.add_subcommand("ablate", "run the scenario battery");
  ab->add_option("--config", common.config_path, "JSON config file");
  ab->add_option("--seed", common.seed, "master seed override")
      ->each([&](const std::string&) { common.seed_set = true; });
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--out", out_dir, "output directory")->required();
  ab->add_flag("--verbose", verbose, "progress to stderr");

  CLI::App* rp = app.add_subcommand("report", "re-render the table from ablation output");
  rp->add_option("--dir", dir, "ablation output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return phantomqa::kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(common, out_dir);
    if (tr->parsed()) return cmd_train(common, data_dir, out_dir, ov);
    if (ev->parsed()) return cmd_eval(ckpt_path, data_dir, split, input, working_px, out_path);
    if (ab->parsed()) return cmd_ablate(common, data_dir, out_dir, verbose);
    if (rp->parsed()) return cmd_report(dir);
  } catch (const phantomqa::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return phantomqa::kExitConfig;
  } catch (const phantomqa::FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return phantomqa::kExitFormat;
  } catch (const phantomqa::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return phantomqa::kExitIo;
  }
  return phantomqa::kExitUsage;
}
