#include "phantomqa/model.hpp"

#include <map>

#include "phantomqa/errors.hpp"
#include "phantomqa/init.hpp"
#include "phantomqa/rng.hpp"

namespace phantomqa {

ModelConfig desk_preset() {
  ModelConfig cfg;
  cfg.input_px = 64;
  cfg.blocks = {{2, 8}, {2, 16}, {3, 32}};
  cfg.head_width = 64;
  return cfg;
}

ModelConfig vgg19_preset(int head_width) {
  ModelConfig cfg;
  cfg.input_px = 256;
  cfg.blocks = {{2, 64}, {2, 128}, {4, 256}, {4, 512}, {4, 512}};
  cfg.head_width = head_width;
  return cfg;
}

std::int64_t conv_stack_params(const ModelConfig& cfg) {
  std::int64_t n = 0;
  int cin = cfg.in_channels;
  for (const auto& [convs, ch] : cfg.blocks) {
    for (int i = 0; i < convs; ++i) {
      n += static_cast<std::int64_t>(ch) * (9 * cin + 1);
      cin = ch;
    }
  }
  return n;
}

std::int64_t head_dense_params(const ModelConfig& cfg) {
  const std::int64_t f = cfg.flatten_size(), p = cfg.head_width;
  return f * p + p * p;
}

std::int64_t head_bn_params(const ModelConfig& cfg) {
  // gamma, beta, running mean, running var: 4 stored values per feature,
  // two batchnorm layers.
  return 2 * 4 * static_cast<std::int64_t>(cfg.head_width);
}

std::int64_t output_layer_params(const ModelConfig& cfg) {
  return static_cast<std::int64_t>(cfg.head_width) * cfg.num_classes + cfg.num_classes;
}

std::int64_t total_params(const ModelConfig& cfg) {
  return conv_stack_params(cfg) + head_dense_params(cfg) + head_bn_params(cfg) +
         output_layer_params(cfg);
}

Model::Model(const ModelConfig& cfg, InitMode init, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.input_px <= 0 || cfg.head_width <= 0 || cfg.num_classes < 2) {
    throw ConfigError("model: invalid architecture configuration");
  }
  int s = cfg.input_px;
  for (const auto& [convs, ch] : cfg.blocks) {
    if (convs <= 0 || ch <= 0) throw ConfigError("model: block entries must be positive");
    if (s % 2 != 0) {
      throw ConfigError("model: input " + std::to_string(cfg.input_px) +
                        " px cannot be pooled " + std::to_string(cfg.blocks.size()) +
                        " times");
    }
    s /= 2;
  }

  RngState rng(seed);
  std::uint64_t ordinal = 0;
  // Each parameter draws from its own substream keyed by its position in
  // the declaration order, so the head draws do not depend on the conv
  // init mode.
  const auto next_stream = [&]() { return rng.substream(ordinal++); };

  int cin = cfg.in_channels;
  for (const auto& [convs, ch] : cfg.blocks) {
    std::vector<ConvLayer> block;
    for (int i = 0; i < convs; ++i) {
      ConvLayer layer;
      TensorF w({ch, cin, 3, 3});
      RngState ws = next_stream();
      if (init == InitMode::kUnitNormalConv) {
        normal_init(w, ws);
      } else {
        he_init(w, cin * 9, ws);
      }
      layer.w = Parameter<real_t>("", std::move(w));
      next_stream();  // bias ordinal reserved; biases start at zero
      layer.b = Parameter<real_t>("", TensorF::zeros({ch}));
      block.push_back(std::move(layer));
      cin = ch;
    }
    blocks_.push_back(std::move(block));
  }

  const int f = cfg.flatten_size(), p = cfg.head_width;
  {
    TensorF w({p, f});
    he_init(w, f, next_stream());
    fc1_w_ = Parameter<real_t>("head.fc1.weight", std::move(w));
  }
  bn1_ = {Parameter<real_t>("head.bn1.gamma", TensorF::full({p}, 1.0f)),
          Parameter<real_t>("head.bn1.beta", TensorF::zeros({p})), TensorF::zeros({p}),
          TensorF::full({p}, 1.0f)};
  ordinal += 2;  // bn1 gamma/beta ordinals
  {
    TensorF w({p, p});
    he_init(w, p, next_stream());
    fc2_w_ = Parameter<real_t>("head.fc2.weight", std::move(w));
  }
  bn2_ = {Parameter<real_t>("head.bn2.gamma", TensorF::full({p}, 1.0f)),
          Parameter<real_t>("head.bn2.beta", TensorF::zeros({p})), TensorF::zeros({p}),
          TensorF::full({p}, 1.0f)};
  ordinal += 2;
  {
    TensorF w({cfg.num_classes, p});
    he_init(w, p, next_stream());
    out_w_ = Parameter<real_t>("head.out.weight", std::move(w));
  }
  next_stream();
  out_b_ = Parameter<real_t>("head.out.bias", TensorF::zeros({cfg.num_classes}));

  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (std::size_t i = 0; i < blocks_[b].size(); ++i) {
      const std::string stem =
          "conv" + std::to_string(b + 1) + "_" + std::to_string(i + 1);
      blocks_[b][i].w.name = stem + ".weight";
      blocks_[b][i].b.name = stem + ".bias";
    }
  }
}

TensorF Model::head_forward(const TensorF& flat, ops::Mode mode) {
  const bool train = mode == ops::Mode::kTrain;
  TensorF h = ops::dense(flat, fc1_w_.value, static_cast<const TensorF*>(nullptr));
  h = ops::batchnorm(h, bn1_.gamma.value, bn1_.beta.value, bn1_.running_mean, bn1_.running_var,
                     mode, static_cast<real_t>(cfg_.bn_momentum),
                     static_cast<real_t>(cfg_.bn_eps), train ? &bn1_ctx_ : nullptr);
  ops::relu_inplace(h);
  if (train) r1_ = h;
  h = ops::dense(h, fc2_w_.value, static_cast<const TensorF*>(nullptr));
  h = ops::batchnorm(h, bn2_.gamma.value, bn2_.beta.value, bn2_.running_mean, bn2_.running_var,
                     mode, static_cast<real_t>(cfg_.bn_momentum),
                     static_cast<real_t>(cfg_.bn_eps), train ? &bn2_ctx_ : nullptr);
  ops::relu_inplace(h);
  if (train) r2_ = h;
  return ops::dense(h, out_w_.value, &out_b_.value);
}

TensorF Model::forward(const TensorF& x, ops::Mode mode) {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels || x.dim(2) != cfg_.input_px ||
      x.dim(3) != cfg_.input_px) {
    throw std::invalid_argument("model: input must be [N," + std::to_string(cfg_.in_channels) +
                                "," + std::to_string(cfg_.input_px) + "," +
                                std::to_string(cfg_.input_px) + "], got " + x.shape_str());
  }
  const bool train = mode == ops::Mode::kTrain;
  const int N = x.dim(0);

  cached_ = train;
  if (train) {
    act_.assign(blocks_.size(), {});
    pool_out_.assign(blocks_.size(), TensorF());
    pool_arg_.clear();
    pool_in_shape_.clear();
    in_ = x;
  }

  TensorF hold;  // infer-mode stage storage
  const TensorF* cur = &x;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (auto& layer : blocks_[b]) {
      TensorF y = ops::conv2d(*cur, layer.w.value, layer.b.value);
      ops::relu_inplace(y);
      if (train) {
        act_[b].push_back(std::move(y));
        cur = &act_[b].back();
      } else {
        hold = std::move(y);
        cur = &hold;
      }
    }
    auto pooled = ops::maxpool2x2(*cur);
    if (train) {
      pool_arg_.push_back(std::move(pooled.argmax));
      pool_in_shape_.push_back(cur->shape);
      pool_out_[b] = std::move(pooled.out);
      cur = &pool_out_[b];
    } else {
      hold = std::move(pooled.out);
      cur = &hold;
    }
  }

  TensorF flat = cur->reshaped({N, cfg_.flatten_size()});
  if (train) flat_ = flat;
  return head_forward(flat, mode);
}

void Model::backward(const TensorF& dlogits) {
  if (!cached_) throw std::logic_error("model: backward without a cached train forward");

  auto g_out = ops::dense_backward(r2_, out_w_.value, dlogits, /*has_bias=*/true);
  out_w_.grad = std::move(g_out.dw);
  out_b_.grad = std::move(g_out.db);

  TensorF g = ops::relu_backward(r2_, g_out.dx);
  auto g_bn2 = ops::batchnorm_backward(bn2_ctx_, bn2_.gamma.value, g);
  bn2_.gamma.grad = std::move(g_bn2.dgamma);
  bn2_.beta.grad = std::move(g_bn2.dbeta);
  auto g_fc2 = ops::dense_backward(r1_, fc2_w_.value, g_bn2.dx, /*has_bias=*/false);
  fc2_w_.grad = std::move(g_fc2.dw);

  g = ops::relu_backward(r1_, g_fc2.dx);
  auto g_bn1 = ops::batchnorm_backward(bn1_ctx_, bn1_.gamma.value, g);
  bn1_.gamma.grad = std::move(g_bn1.dgamma);
  bn1_.beta.grad = std::move(g_bn1.dbeta);
  auto g_fc1 = ops::dense_backward(flat_, fc1_w_.value, g_bn1.dx, /*has_bias=*/false);
  fc1_w_.grad = std::move(g_fc1.dw);

  const int nb = static_cast<int>(blocks_.size());
  std::vector<int> base(blocks_.size());  // global index of each block's first conv layer
  int acc = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    base[b] = acc;
    acc += static_cast<int>(blocks_[b].size());
  }

  TensorF grad = g_fc1.dx.reshaped(pool_out_[static_cast<std::size_t>(nb - 1)].shape);
  // Frozen layers form a prefix from the input, so the walk can stop as soon
  // as every layer at or below the current point is frozen.
  for (int b = nb - 1; b >= 0; --b) {
    const auto bu = static_cast<std::size_t>(b);
    if (base[bu] + static_cast<int>(blocks_[bu].size()) <= frozen_layers_) break;
    grad = ops::maxpool2x2_backward(pool_arg_[bu], grad, pool_in_shape_[bu]);
    for (int i = static_cast<int>(blocks_[bu].size()) - 1; i >= 0; --i) {
      if (base[bu] + i < frozen_layers_) break;
      auto& layer = blocks_[bu][static_cast<std::size_t>(i)];
      grad = ops::relu_backward(act_[bu][static_cast<std::size_t>(i)], grad);
      const TensorF& input = i > 0 ? act_[bu][static_cast<std::size_t>(i - 1)]
                                   : (b > 0 ? pool_out_[bu - 1] : in_);
      auto gc = ops::conv2d_backward(input, layer.w.value, grad, /*need_dw=*/true);
      layer.w.grad = std::move(gc.dw);
      layer.b.grad = std::move(gc.db);
      grad = std::move(gc.dx);
    }
  }
}

std::vector<Parameter<real_t>*> Model::parameters() {
  std::vector<Parameter<real_t>*> out;
  for (auto& block : blocks_) {
    for (auto& layer : block) {
      out.push_back(&layer.w);
      out.push_back(&layer.b);
    }
  }
  out.push_back(&fc1_w_);
  out.push_back(&bn1_.gamma);
  out.push_back(&bn1_.beta);
  out.push_back(&fc2_w_);
  out.push_back(&bn2_.gamma);
  out.push_back(&bn2_.beta);
  out.push_back(&out_w_);
  out.push_back(&out_b_);
  return out;
}

int Model::conv_layer_count() const {
  int n = 0;
  for (const auto& block : blocks_) n += static_cast<int>(block.size());
  return n;
}

void Model::freeze_layers(int k) {
  if (k < 0 || k > conv_layer_count()) {
    throw ConfigError("model: cannot freeze " + std::to_string(k) + " of " +
                      std::to_string(conv_layer_count()) + " conv layers");
  }
  frozen_layers_ = k;
  int g = 0;
  for (auto& block : blocks_) {
    for (auto& layer : block) {
      const bool frozen = g < k;
      layer.w.frozen = frozen;
      layer.b.frozen = frozen;
      ++g;
    }
  }
}

std::vector<std::string> Model::frozen_conv_layers() const {
  std::vector<std::string> out;
  int g = 0;
  for (const auto& block : blocks_) {
    for (const auto& layer : block) {
      if (g < frozen_layers_) {
        std::string stem = layer.w.name;
        stem.erase(stem.rfind(".weight"));
        out.push_back(std::move(stem));
      }
      ++g;
    }
  }
  return out;
}

std::int64_t Model::param_count() const {
  // Stored-value count, matching the config arithmetic: optimizer-visible
  // parameters plus the batchnorm running estimates.
  std::int64_t n = 0;
  for (const auto& block : blocks_) {
    for (const auto& layer : block) n += layer.w.value.numel() + layer.b.value.numel();
  }
  n += fc1_w_.value.numel() + fc2_w_.value.numel() + out_w_.value.numel() + out_b_.value.numel();
  for (const BnLayer* bn : {&bn1_, &bn2_}) {
    n += bn->gamma.value.numel() + bn->beta.value.numel() + bn->running_mean.numel() +
         bn->running_var.numel();
  }
  return n;
}

std::vector<NamedTensor> Model::named_tensors() const {
  std::vector<NamedTensor> out;
  for (const auto& block : blocks_) {
    for (const auto& layer : block) {
      out.push_back({layer.w.name, layer.w.value});
      out.push_back({layer.b.name, layer.b.value});
    }
  }
  const auto push_bn = [&](const BnLayer& bn, const std::string& stem) {
    out.push_back({stem + ".gamma", bn.gamma.value});
    out.push_back({stem + ".beta", bn.beta.value});
    out.push_back({stem + ".running_mean", bn.running_mean});
    out.push_back({stem + ".running_var", bn.running_var});
  };
  out.push_back({fc1_w_.name, fc1_w_.value});
  push_bn(bn1_, "head.bn1");
  out.push_back({fc2_w_.name, fc2_w_.value});
  push_bn(bn2_, "head.bn2");
  out.push_back({out_w_.name, out_w_.value});
  out.push_back({out_b_.name, out_b_.value});
  return out;
}

namespace {

const TensorF& find_tensor(const std::map<std::string, const TensorF*>& index,
                           const std::string& name, const std::vector<int>& want_shape) {
  auto it = index.find(name);
  if (it == index.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
  if (it->second->shape != want_shape) {
    throw FormatError("checkpoint tensor '" + name + "' has shape " + it->second->shape_str() +
                      ", model expects " + Tensor<float>::zeros(want_shape).shape_str());
  }
  return *it->second;
}

}  // namespace

void Model::load_named_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const TensorF*> index;
  for (const auto& t : tensors) index[t.name] = &t.value;
  // Two passes: validate the full fingerprint first so a mismatch leaves
  // the model untouched.
  for (const auto& mine : named_tensors()) find_tensor(index, mine.name, mine.value.shape);

  for (auto& block : blocks_) {
    for (auto& layer : block) {
      layer.w.value = find_tensor(index, layer.w.name, layer.w.value.shape);
      layer.b.value = find_tensor(index, layer.b.name, layer.b.value.shape);
    }
  }
  const auto load_bn = [&](BnLayer& bn, const std::string& stem) {
    bn.gamma.value = find_tensor(index, stem + ".gamma", bn.gamma.value.shape);
    bn.beta.value = find_tensor(index, stem + ".beta", bn.beta.value.shape);
    bn.running_mean = find_tensor(index, stem + ".running_mean", bn.running_mean.shape);
    bn.running_var = find_tensor(index, stem + ".running_var", bn.running_var.shape);
  };
  fc1_w_.value = find_tensor(index, fc1_w_.name, fc1_w_.value.shape);
  load_bn(bn1_, "head.bn1");
  fc2_w_.value = find_tensor(index, fc2_w_.name, fc2_w_.value.shape);
  load_bn(bn2_, "head.bn2");
  out_w_.value = find_tensor(index, out_w_.name, out_w_.value.shape);
  out_b_.value = find_tensor(index, out_b_.name, out_b_.value.shape);
}

void Model::load_conv_stack(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const TensorF*> index;
  for (const auto& t : tensors) index[t.name] = &t.value;
  for (auto& block : blocks_) {
    for (auto& layer : block) {
      layer.w.value = find_tensor(index, layer.w.name, layer.w.value.shape);
      layer.b.value = find_tensor(index, layer.b.name, layer.b.value.shape);
    }
  }
}

std::vector<int> Model::argmax_rows(const TensorF& logits) {
  const int N = logits.dim(0), K = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (logits.at(n, k) > logits.at(n, best)) best = k;
    }
    out[static_cast<std::size_t>(n)] = best;
  }
  return out;
}

}  // namespace phantomqa
