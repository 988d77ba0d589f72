#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phantomqa/augment.hpp"
#include "phantomqa/metrics.hpp"
#include "phantomqa/model.hpp"
#include "phantomqa/optim.hpp"
#include "phantomqa/preprocess.hpp"

namespace phantomqa {

// How a slice becomes the network's 3 channels.
enum class StackMode {
  kAxial = 0,      // previous / central / next slice
  kTriplicate = 1  // central slice copied three times
};

const char* to_string(StackMode m);
StackMode stack_mode_from_string(const std::string& s);

// A split ready for the network: u8 channel stacks with labels. Kept in u8
// until batch assembly so augmentation runs in image space.
struct Dataset {
  std::vector<ModelInput> samples;
  std::vector<double> transition_dist_mm;  // of the central slice
};

Dataset assemble_dataset(const std::vector<ProcessedSeries>& series, StackMode mode);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  AdamConfig adam;  // lr 1e-3 with 1e-3 per-step decay
  bool augment = true;
  AugmentConfig augmentation;
  StackMode stack = StackMode::kAxial;
  std::uint64_t seed = 1;
};

// Per-epoch record: loss/accuracy are running means over the epoch's train
// steps; val numbers come from a full inference pass after the epoch.
struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

// Minibatch SGD over the train split: Fisher-Yates shuffle per epoch (own
// substream), floor(N/batch) steps with the tail dropped, augmentation on
// the train split only with one substream per (epoch, sample), Adam with a
// global step counter. Empty splits are rejected. The callback, when set,
// runs after each epoch's log entry is complete.
std::vector<EpochLog> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                            const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch = nullptr);

// Inference pass: argmax predictions (ties to the lower class index) against
// truth. Batch composition cannot matter in infer mode.
EvalReport evaluate(Model& model, const Dataset& split);

// Mean cross-entropy and accuracy of an inference pass (the val half of an
// EpochLog).
struct EvalLoss {
  double loss = 0.0;
  double acc = 0.0;
};
EvalLoss evaluate_loss(Model& model, const Dataset& split);

// Window-mean smoothing used by the training-progress invariant checks.
std::vector<double> smooth_window(const std::vector<double>& xs, int window);

}  // namespace phantomqa
