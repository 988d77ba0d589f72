#include "phantomqa/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "phantomqa/binio.hpp"
#include "phantomqa/dataset_io.hpp"
#include "phantomqa/errors.hpp"
#include "phantomqa/proxy.hpp"

namespace phantomqa {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// First epoch whose val accuracy reaches the bar, or 0 when none does.
int epochs_to_val(const std::vector<EpochLog>& logs, double bar) {
  for (const EpochLog& e : logs) {
    if (e.val_acc >= bar) return e.epoch;
  }
  return 0;
}

std::int64_t agp_as_usable(const EvalReport& r) {
  const auto& row = r.cm.m[static_cast<std::size_t>(static_cast<int>(SliceLabel::kAGP))];
  return row[static_cast<std::size_t>(static_cast<int>(SliceLabel::kNPS))] +
         row[static_cast<std::size_t>(static_cast<int>(SliceLabel::kTTF))] +
         row[static_cast<std::size_t>(static_cast<int>(SliceLabel::kTaS))];
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  binio::write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
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

}  // namespace

ExperimentSpec scenario_spec(const std::string& name, const RunConfig& base) {
  ExperimentSpec spec;
  spec.name = name;
  spec.model = base.model;
  spec.train = base.train;
  spec.init_mode = "proxy";
  spec.freeze_layers = 0;
  if (name == "baseline") {
    return spec;
  }
  if (name.rfind("np", 0) == 0) {
    const int width = std::atoi(name.c_str() + 2);
    if (width <= 0) throw ConfigError("scenario '" + name + "': bad head width");
    spec.model.head_width = width;
    return spec;
  }
  if (name == "ri") {
    spec.init_mode = "normal";
    return spec;
  }
  if (name.size() == 2 && name[0] == 'f' && name[1] >= '1' && name[1] <= '9') {
    spec.freeze_layers = name[1] - '0';
    return spec;
  }
  if (name == "triplicate") {
    spec.train.stack = StackMode::kTriplicate;
    return spec;
  }
  if (name == "noaug") {
    spec.train.augment = false;
    return spec;
  }
  throw ConfigError("unknown scenario '" + name + "'");
}

BoxStats box_stats(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("box_stats: empty sample");
  std::sort(xs.begin(), xs.end());
  const auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + (xs[hi] - xs[lo]) * frac;
  };
  return {xs.front(), quantile(0.25), quantile(0.5), quantile(0.75), xs.back()};
}

std::string dataset_fingerprint(const SplitSet& splits) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  const auto fold = [&](const std::vector<LabeledSeries>& series) {
    for (const LabeledSeries& s : series) {
      for (const LabeledSlice& sl : s.slices) {
        h = fnv1a(h, sl.hu.data.data(), sl.hu.data.size() * sizeof(std::int16_t));
        const int label = static_cast<int>(sl.label);
        h = fnv1a(h, &label, sizeof(label));
        h = fnv1a(h, &sl.z_center_mm, sizeof(double));
        h = fnv1a(h, &sl.transition_dist_mm, sizeof(double));
      }
    }
  };
  fold(splits.train);
  fold(splits.val);
  fold(splits.test);
  fold(splits.extreme);
  return hex64(h);
}

namespace {

struct PreparedSplits {
  std::vector<ProcessedSeries> train, val, test, extreme;
};

PreparedSplits preprocess_splits(const RunConfig& cfg, const SplitSet& splits) {
  PreparedSplits out;
  int id = 0;
  const auto prep = [&](const std::vector<LabeledSeries>& in,
                        std::vector<ProcessedSeries>& dst) {
    for (const LabeledSeries& s : in) dst.push_back(preprocess_series(s, cfg.working_px, id++));
  };
  prep(splits.train, out.train);
  prep(splits.val, out.val);
  prep(splits.test, out.test);
  prep(splits.extreme, out.extreme);
  return out;
}

struct StackedSplits {
  Dataset train, val, test, extreme;
};

StackedSplits assemble_splits(const PreparedSplits& prepared, StackMode mode) {
  return {assemble_dataset(prepared.train, mode), assemble_dataset(prepared.val, mode),
          assemble_dataset(prepared.test, mode), assemble_dataset(prepared.extreme, mode)};
}

nlohmann::json scenario_summary(const ScenarioResult& r) {
  return {{"name", r.name},
          {"val", r.val},
          {"test", r.test},
          {"extreme", r.extreme},
          {"agp_misread_as_usable", r.agp_misread_as_usable},
          {"epochs", r.epochs}};
}

}  // namespace

std::string render_ablation_table(const std::vector<ScenarioResult>& scenarios) {
  const ScenarioResult* baseline = nullptr;
  for (const ScenarioResult& r : scenarios) {
    if (r.name == "baseline") baseline = &r;
  }
  const auto is_freeze_row = [](const std::string& name) {
    return name == "baseline" || (name.size() == 2 && name[0] == 'f' && std::isdigit(name[1]));
  };

  std::string t;
  t += "scenario     val_acc  d_base   test_acc extreme  agp_ok  ep>=0.90\n";
  t += "------------ -------- -------- -------- -------- ------- --------\n";
  for (const ScenarioResult& r : scenarios) {
    char line[160];
    const double val = r.val.accuracy.value();
    const std::string delta =
        baseline ? fmt4(val - baseline->val.accuracy.value()) : std::string("-");
    const int e90 = epochs_to_val(r.epochs, 0.90);
    std::snprintf(line, sizeof(line), "%-12s %-8s %-8s %-8s %-8s %-7lld %-8s\n", r.name.c_str(),
                  fmt4(val).c_str(), delta.c_str(), fmt4(r.test.accuracy.value()).c_str(),
                  fmt4(r.extreme.accuracy.value()).c_str(),
                  static_cast<long long>(r.agp_misread_as_usable),
                  e90 > 0 ? std::to_string(e90).c_str() : "-");
    t += line;
  }

  bool any_freeze = false;
  for (const ScenarioResult& r : scenarios) {
    if (is_freeze_row(r.name) && !r.epochs.empty()) any_freeze = true;
  }
  if (any_freeze) {
    // Spread of train accuracy over the second half of the run: early-layer
    // freezing should not widen it.
    t += "\nsecond-half train accuracy\n";
    t += "scenario     min      q1       median   q3       max\n";
    t += "------------ -------- -------- -------- -------- --------\n";
    for (const ScenarioResult& r : scenarios) {
      if (!is_freeze_row(r.name) || r.epochs.empty()) continue;
      std::vector<double> accs;
      for (std::size_t i = r.epochs.size() / 2; i < r.epochs.size(); ++i) {
        accs.push_back(r.epochs[i].train_acc);
      }
      const BoxStats b = box_stats(accs);
      char line[160];
      std::snprintf(line, sizeof(line), "%-12s %-8s %-8s %-8s %-8s %-8s\n", r.name.c_str(),
                    fmt4(b.lo).c_str(), fmt4(b.q1).c_str(), fmt4(b.med).c_str(),
                    fmt4(b.q3).c_str(), fmt4(b.hi).c_str());
      t += line;
    }
  }
  return t;
}

AblationOutcome run_experiments(const RunConfig& cfg, const SplitSet& splits,
                                const std::filesystem::path& out_dir, bool verbose) {
  cfg.validate();
  if (cfg.scenarios.empty()) throw ConfigError("ablation: the scenario list is empty");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const std::string data_fp = dataset_fingerprint(splits);
  const std::string cfg_fp = config_hash(cfg);
  const PreparedSplits prepared = preprocess_splits(cfg, splits);

  // One assembly per stack mode, shared across scenarios.
  const StackedSplits axial = assemble_splits(prepared, StackMode::kAxial);
  StackedSplits triplicate;
  bool have_triplicate = false;

  // Same weights-and-shuffle seeds everywhere so each scenario differs from
  // the baseline only in its single departure.
  RngState master(cfg.master_seed);
  const std::uint64_t model_seed = master.substream(10).seed();
  const std::uint64_t train_seed = master.substream(11).seed();

  // Donor conv stack for transfer-initialized scenarios, pretrained once.
  Checkpoint donor;
  bool have_donor = false;
  const auto ensure_donor = [&]() {
    if (have_donor) return;
    const std::filesystem::path dpath = out_dir / "donor.pckp";
    const std::filesystem::path fpath = out_dir / "donor.fpr";
    const std::string want = cfg_fp + "\n";
    if (std::filesystem::exists(dpath) && std::filesystem::exists(fpath)) {
      const std::vector<std::uint8_t> f = binio::read_file(fpath);
      if (std::string(f.begin(), f.end()) == want) {
        donor = load_checkpoint(dpath);
        have_donor = true;
        return;
      }
    }
    if (verbose) std::fprintf(stderr, "[ablate] pretraining donor conv stack\n");
    ProxyResult proxy = pretrain_proxy(cfg.model, cfg.proxy);
    donor = std::move(proxy.donor);
    save_checkpoint(dpath, donor);
    write_json(out_dir / "donor_epochs.json", nlohmann::json(proxy.epochs));
    binio::write_file_atomic(fpath, want);
    have_donor = true;
  };

  AblationOutcome outcome;
  for (const std::string& name : cfg.scenarios) {
    const ExperimentSpec spec = scenario_spec(name, cfg);
    const std::filesystem::path dir = out_dir / name;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const std::string fingerprint = cfg_fp + "-" + name + "-" + data_fp + "\n";
    const std::filesystem::path fpath = dir / "fingerprint.txt";

    ScenarioResult result;
    result.name = name;

    bool resumed = false;
    if (std::filesystem::exists(fpath)) {
      const std::vector<std::uint8_t> f = binio::read_file(fpath);
      if (std::string(f.begin(), f.end()) == fingerprint &&
          std::filesystem::exists(dir / "epochs.json") &&
          std::filesystem::exists(dir / "eval_val.json") &&
          std::filesystem::exists(dir / "eval_test.json") &&
          std::filesystem::exists(dir / "eval_extreme.json") &&
          std::filesystem::exists(dir / "checkpoint.pckp")) {
        result.epochs = read_json(dir / "epochs.json").get<std::vector<EpochLog>>();
        result.val = read_json(dir / "eval_val.json").get<EvalReport>();
        result.test = read_json(dir / "eval_test.json").get<EvalReport>();
        result.extreme = read_json(dir / "eval_extreme.json").get<EvalReport>();
        resumed = true;
        if (verbose) std::fprintf(stderr, "[ablate] %s: up to date, skipping\n", name.c_str());
      }
    }

    if (!resumed) {
      if (spec.train.stack == StackMode::kTriplicate && !have_triplicate) {
        triplicate = assemble_splits(prepared, StackMode::kTriplicate);
        have_triplicate = true;
      }
      const StackedSplits& data =
          spec.train.stack == StackMode::kTriplicate ? triplicate : axial;

      Model model(spec.model, init_mode_from_string(spec.init_mode), model_seed);
      if (spec.init_mode == "proxy") {
        ensure_donor();
        transfer_conv_stack(model, donor);
      }
      model.freeze_layers(spec.freeze_layers);

      TrainConfig tc = spec.train;
      tc.seed = train_seed;
      if (verbose) std::fprintf(stderr, "[ablate] %s: training %d epochs\n", name.c_str(),
                                tc.epochs);
      std::function<void(const EpochLog&)> progress;
      if (verbose) {
        progress = [&name](const EpochLog& e) {
          std::fprintf(stderr, "[ablate] %s epoch %d loss %.4f acc %.4f val %.4f\n",
                       name.c_str(), e.epoch, e.train_loss, e.train_acc, e.val_acc);
        };
      }
      result.epochs = train(model, data.train, data.val, tc, progress);
      result.val = evaluate(model, data.val);
      result.test = evaluate(model, data.test);
      result.extreme = evaluate(model, data.extreme);

      save_checkpoint(dir / "checkpoint.pckp", checkpoint_from_model(model));
      write_json(dir / "epochs.json", nlohmann::json(result.epochs));
      write_json(dir / "eval_val.json", nlohmann::json(result.val));
      write_json(dir / "eval_test.json", nlohmann::json(result.test));
      write_json(dir / "eval_extreme.json", nlohmann::json(result.extreme));
      binio::write_file_atomic(fpath, fingerprint);
    }

    result.agp_misread_as_usable = agp_as_usable(result.extreme);
    outcome.scenarios.push_back(std::move(result));
  }

  outcome.table = render_ablation_table(outcome.scenarios);
  binio::write_file_atomic(out_dir / "table.txt", outcome.table);

  nlohmann::json summary = nlohmann::json::array();
  for (const ScenarioResult& r : outcome.scenarios) summary.push_back(scenario_summary(r));
  write_json(out_dir / "summary.json", summary);
  return outcome;
}

}  // namespace phantomqa
