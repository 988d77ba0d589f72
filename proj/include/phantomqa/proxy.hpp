#pragma once

#include <cstdint>
#include <vector>

#include "phantomqa/checkpoint.hpp"
#include "phantomqa/train.hpp"

namespace phantomqa {

// Stand-in pretraining task when no donor network is available: synthetic
// multi-shape scenes rendered in HU through the same windowing pipeline,
// labeled by the dominant (largest) shape. Five shape classes reuse the five
// class slots. The trained conv stack is exported as a donor checkpoint;
// the head is discarded.

struct ProxyConfig {
  int train_scenes = 600;
  int val_scenes = 120;
  int max_shapes = 3;  // per scene, >= 1
  int epochs = 12;
  std::uint64_t seed = 7;
  AdamConfig adam;
};

// One scene at the given square size, HU-valued; class index in [0, 5).
struct ProxyScene {
  TensorI16 hu;
  int label = 0;
};

ProxyScene render_proxy_scene(int size_px, int max_shapes, RngState rng);

// Scenes as triplicate-stacked u8 model inputs.
Dataset proxy_dataset(int scenes, int size_px, int max_shapes, RngState rng);

struct ProxyResult {
  Checkpoint donor;  // conv stack only
  double val_acc = 0.0;
  std::vector<EpochLog> epochs;
};

// Train arch's conv stack (with a scratch head) on the proxy task and return
// the donor checkpoint. Scenes render at 2x the input size and pass through
// the downsample/window path.
ProxyResult pretrain_proxy(const ModelConfig& arch, const ProxyConfig& cfg);

}  // namespace phantomqa
