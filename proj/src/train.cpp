#include "phantomqa/train.hpp"

#include <algorithm>
#include <numeric>

#include "phantomqa/errors.hpp"
#include "phantomqa/ops.hpp"

namespace phantomqa {

namespace {

// Substream ids under TrainConfig::seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAugmentStream = 2;

TensorF batch_from(const Dataset& set, const std::vector<int>& order, std::size_t first,
                   int count, const AugmentConfig* aug, RngState* aug_epoch_stream) {
  const std::vector<int>& shape = set.samples.front().channels.shape;
  const int C = shape[0], H = shape[1], W = shape[2];
  TensorF out({count, C, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(C) * H * W;
  for (int b = 0; b < count; ++b) {
    const int idx = order[first + static_cast<std::size_t>(b)];
    const ModelInput& s = set.samples[static_cast<std::size_t>(idx)];
    TensorU8 img = s.channels;
    if (aug != nullptr) {
      // Keyed by the sample's dataset index: the draw a sample sees does not
      // depend on where the shuffle placed it.
      RngState rng = aug_epoch_stream->substream(static_cast<std::uint64_t>(idx));
      img = apply_augment(img, *aug, rng);
    }
    const TensorF f = to_float(img);
    std::copy(f.data.begin(), f.data.end(), out.data.begin() + b * plane);
  }
  return out;
}

std::vector<int> batch_labels(const Dataset& set, const std::vector<int>& order,
                              std::size_t first, int count) {
  std::vector<int> out(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    const int idx = order[first + static_cast<std::size_t>(b)];
    out[static_cast<std::size_t>(b)] =
        static_cast<int>(set.samples[static_cast<std::size_t>(idx)].label);
  }
  return out;
}

}  // namespace

const char* to_string(StackMode m) {
  return m == StackMode::kAxial ? "axial" : "triplicate";
}

StackMode stack_mode_from_string(const std::string& s) {
  if (s == "axial") return StackMode::kAxial;
  if (s == "triplicate") return StackMode::kTriplicate;
  throw ConfigError("unknown stack mode '" + s + "' (axial or triplicate)");
}

Dataset assemble_dataset(const std::vector<ProcessedSeries>& series, StackMode mode) {
  Dataset out;
  for (const ProcessedSeries& s : series) {
    for (int i = 0; i < static_cast<int>(s.slices.size()); ++i) {
      out.samples.push_back(mode == StackMode::kAxial ? stack_axial(s, i)
                                                      : stack_triplicate(s, i));
      out.transition_dist_mm.push_back(s.transition_dist_mm[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

std::vector<EpochLog> train(Model& model, const Dataset& train_set, const Dataset& val_set,
                            const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.samples.empty()) throw ConfigError("train: the train split is empty");
  if (val_set.samples.empty()) throw ConfigError("train: the validation split is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 2) {
    throw ConfigError("train: need at least 1 epoch and a batch size of 2 (batchnorm)");
  }
  if (cfg.augment) cfg.augmentation.validate();
  const int N = static_cast<int>(train_set.samples.size());
  const int steps = N / cfg.batch_size;
  if (steps < 1) {
    throw ConfigError("train: " + std::to_string(N) + " samples cannot fill one batch of " +
                      std::to_string(cfg.batch_size));
  }

  RngState root(cfg.seed);
  std::vector<Parameter<real_t>*> params = model.parameters();
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> logs;
  std::int64_t adam_t = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngState shuffle = root.substream(kShuffleStream).substream(static_cast<std::uint64_t>(epoch));
    for (int i = N - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    RngState aug_epoch =
        root.substream(kAugmentStream).substream(static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    std::int64_t correct = 0;
    for (int step = 0; step < steps; ++step) {
      const std::size_t first = static_cast<std::size_t>(step) * cfg.batch_size;
      const TensorF x = batch_from(train_set, order, first, cfg.batch_size,
                                   cfg.augment ? &cfg.augmentation : nullptr, &aug_epoch);
      const std::vector<int> labels = batch_labels(train_set, order, first, cfg.batch_size);

      const TensorF logits = model.forward(x, ops::Mode::kTrain);
      const auto ce = ops::softmax_cross_entropy_batch(logits, labels);
      loss_sum += ce.mean_loss;
      const std::vector<int> preds = Model::argmax_rows(logits);
      for (int b = 0; b < cfg.batch_size; ++b) {
        if (preds[static_cast<std::size_t>(b)] == labels[static_cast<std::size_t>(b)]) ++correct;
      }

      model.backward(ce.dlogits);
      adam_step(params, cfg.adam, ++adam_t);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / steps;
    log.train_acc = static_cast<double>(correct) / (static_cast<double>(steps) * cfg.batch_size);
    const EvalLoss val = evaluate_loss(model, val_set);
    log.val_loss = val.loss;
    log.val_acc = val.acc;
    logs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return logs;
}

namespace {

// Infer-mode pass; the visitor sees each batch's logits and label slice.
void infer_pass(Model& model, const Dataset& split,
                const std::function<void(const TensorF&, const std::vector<int>&)>& visit) {
  if (split.samples.empty()) throw ConfigError("evaluate: the split is empty");
  const int N = static_cast<int>(split.samples.size());
  constexpr int kChunk = 32;
  std::vector<int> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  for (int first = 0; first < N; first += kChunk) {
    const int count = std::min(kChunk, N - first);
    const TensorF x = batch_from(split, order, static_cast<std::size_t>(first), count,
                                 nullptr, nullptr);
    const TensorF logits = model.forward(x, ops::Mode::kInfer);
    visit(logits, batch_labels(split, order, static_cast<std::size_t>(first), count));
  }
}

}  // namespace

EvalReport evaluate(Model& model, const Dataset& split) {
  ConfusionMatrix cm;
  infer_pass(model, split, [&](const TensorF& logits, const std::vector<int>& labels) {
    const std::vector<int> preds = Model::argmax_rows(logits);
    for (std::size_t b = 0; b < labels.size(); ++b) {
      cm.add(static_cast<SliceLabel>(labels[b]), static_cast<SliceLabel>(preds[b]));
    }
  });
  return metrics_from_confusion(cm);
}

EvalLoss evaluate_loss(Model& model, const Dataset& split) {
  double loss_sum = 0.0;
  std::int64_t correct = 0, total = 0;
  infer_pass(model, split, [&](const TensorF& logits, const std::vector<int>& labels) {
    const auto ce = ops::softmax_cross_entropy_batch(logits, labels);
    loss_sum += ce.mean_loss * static_cast<double>(labels.size());
    const std::vector<int> preds = Model::argmax_rows(logits);
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (preds[b] == labels[b]) ++correct;
    }
    total += static_cast<std::int64_t>(labels.size());
  });
  return {loss_sum / static_cast<double>(total),
          static_cast<double>(correct) / static_cast<double>(total)};
}

std::vector<double> smooth_window(const std::vector<double>& xs, int window) {
  if (window < 1) throw std::invalid_argument("smooth_window: window must be >= 1");
  std::vector<double> out;
  out.reserve(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<std::size_t>(window)) acc -= xs[i - static_cast<std::size_t>(window)];
    const int n = std::min<int>(window, static_cast<int>(i) + 1);
    out.push_back(acc / n);
  }
  return out;
}

}  // namespace phantomqa
