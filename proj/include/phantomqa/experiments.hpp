#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phantomqa/checkpoint.hpp"
#include "phantomqa/config.hpp"
#include "phantomqa/simulate.hpp"
#include "phantomqa/train.hpp"

namespace phantomqa {

// The ablation battery: every scenario is the baseline recipe with one
// departure. "baseline" = transferred conv stack, axial stacking, full
// augmentation, nothing frozen.

struct ExperimentSpec {
  std::string name;
  ModelConfig model;
  TrainConfig train;
  std::string init_mode;  // proxy | he | normal
  int freeze_layers = 0;
};

// Maps a scenario name onto the base config; unknown names throw
// ConfigError. Known: baseline, np256..np4096, ri, f1..f4, triplicate,
// noaug.
ExperimentSpec scenario_spec(const std::string& name, const RunConfig& base);

struct ScenarioResult {
  std::string name;
  std::vector<EpochLog> epochs;
  EvalReport val, test, extreme;
  // Extreme-split slices that are truly gap-adjacent but were predicted as
  // one of the usable classes (NPS, TTF, TaS).
  std::int64_t agp_misread_as_usable = 0;
};

// Five-number summary of a sample (min, quartiles by linear interpolation,
// max).
struct BoxStats {
  double lo = 0, q1 = 0, med = 0, q3 = 0, hi = 0;
};
BoxStats box_stats(std::vector<double> xs);

struct AblationOutcome {
  std::vector<ScenarioResult> scenarios;
  std::string table;  // the rendered comparison table (also written to disk)
};

// Fixed-width comparison table: accuracy per split, delta against the
// baseline row, gap-adjacent slices misread as usable, epochs to 0.90 val
// accuracy, plus a second-half train-accuracy spread for the freezing rows.
std::string render_ablation_table(const std::vector<ScenarioResult>& scenarios);

// Runs the config's scenario list against shared splits. Each scenario
// writes checkpoint, epoch log and the three evaluation reports under
// out_dir/<name>/ together with a fingerprint of (config, scenario,
// dataset); when the fingerprint and outputs already exist the scenario is
// loaded instead of retrained. The same config and dataset produce
// byte-identical output trees.
AblationOutcome run_experiments(const RunConfig& cfg, const SplitSet& splits,
                                const std::filesystem::path& out_dir, bool verbose = false);

// Deterministic 64-bit fingerprint of the dataset content (slice bytes,
// labels, positions), hex-encoded.
std::string dataset_fingerprint(const SplitSet& splits);

}  // namespace phantomqa
