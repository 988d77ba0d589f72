#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phantomqa/ops.hpp"
#include "phantomqa/optim.hpp"
#include "phantomqa/tensor.hpp"

namespace phantomqa {

// VGG-style classifier: stacks of biased 3x3 convolutions with ReLU, each
// block closed by 2x2 max pooling, then a head of two bias-free dense
// layers with batchnorm/ReLU and a biased output layer. The architecture
// is fixed at construction; forward/backward walk the layer list
// explicitly.

struct ModelConfig {
  int input_px = 64;
  int in_channels = 3;
  std::vector<std::pair<int, int>> blocks = {{2, 8}, {2, 16}, {3, 32}};  // (convs, channels)
  int head_width = 64;
  int num_classes = 5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  int spatial_after_blocks() const {
    int s = input_px;
    for (std::size_t i = 0; i < blocks.size(); ++i) s /= 2;
    return s;
  }
  int flatten_size() const {
    const int s = spatial_after_blocks();
    return blocks.empty() ? in_channels * s * s : blocks.back().second * s * s;
  }
};

ModelConfig desk_preset();
ModelConfig vgg19_preset(int head_width);

// Exact parameter accounting from the config alone.
std::int64_t conv_stack_params(const ModelConfig& cfg);
std::int64_t head_dense_params(const ModelConfig& cfg);  // hidden dense weights only
std::int64_t head_bn_params(const ModelConfig& cfg);
std::int64_t output_layer_params(const ModelConfig& cfg);
std::int64_t total_params(const ModelConfig& cfg);

enum class InitMode {
  kHe,             // sd
  kUnitNormalConv  // conv weights unit normal; head unchanged
};

struct NamedTensor {
  std::string name;
  TensorF value;
};

class Model {
 public:
  Model(const ModelConfig& cfg, InitMode init, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // x is [N,3,S,S] float. Train mode caches activations for backward and
  // updates batchnorm running stats; infer mode does neither.
  TensorF forward(const TensorF& x, ops::Mode mode);

  // d(loss)/d(logits) -> parameter grads (overwritten, not accumulated).
  void backward(const TensorF& dlogits);

  // Stable parameter order: conv blocks first, then head. Batchnorm running
  // stats are not parameters.
  std::vector<Parameter<real_t>*> parameters();

  // Freeze the first k conv layers counted from the input (their weights
  // and biases). Frozen tensors keep their values through training.
  void freeze_layers(int k);
  int frozen_layers() const { return frozen_layers_; }
  int conv_layer_count() const;
  // Name stems of the frozen conv layers, input-first (e.g. "conv1_1").
  std::vector<std::string> frozen_conv_layers() const;

  std::int64_t param_count() const;

  // Checkpoint image: parameters plus batchnorm running stats, stable order.
  std::vector<NamedTensor> named_tensors() const;
  // Load by name; every model tensor must be present with matching shape.
  void load_named_tensors(const std::vector<NamedTensor>& tensors);
  // Load only conv-stack tensors (transfer from a donor checkpoint).
  void load_conv_stack(const std::vector<NamedTensor>& tensors);

  // Predicted class per row; ties take the lower class index.
  static std::vector<int> argmax_rows(const TensorF& logits);

 private:
  struct ConvLayer {
    Parameter<real_t> w, b;
  };
  struct BnLayer {
    Parameter<real_t> gamma, beta;
    TensorF running_mean, running_var;
  };

  TensorF head_forward(const TensorF& flat, ops::Mode mode);

  ModelConfig cfg_;
  std::vector<std::vector<ConvLayer>> blocks_;
  Parameter<real_t> fc1_w_, fc2_w_, out_w_, out_b_;
  BnLayer bn1_, bn2_;
  int frozen_layers_ = 0;

  // Forward caches (train mode only).
  bool cached_ = false;
  TensorF in_;
  std::vector<std::vector<TensorF>> act_;          // post-relu conv outputs
  std::vector<TensorF> pool_out_;                  // block outputs (next block's input)
  std::vector<Tensor<std::int64_t>> pool_arg_;
  std::vector<std::vector<int>> pool_in_shape_;
  TensorF flat_, r1_, r2_;
  ops::BatchNormContext<real_t> bn1_ctx_, bn2_ctx_;
};

}  // namespace phantomqa
