#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "phantomqa/errors.hpp"
#include "phantomqa/model.hpp"
#include "phantomqa/ops.hpp"
#include "phantomqa/rng.hpp"

using namespace phantomqa;

namespace {

TensorF random_input(const ModelConfig& cfg, int n, std::uint64_t seed) {
  TensorF x({n, cfg.in_channels, cfg.input_px, cfg.input_px});
  RngState rng(seed);
  for (auto& v : x.data) v = static_cast<real_t>(rng.next_uniform() - 0.5);
  return x;
}

std::map<std::string, TensorF> by_name(const Model& m) {
  std::map<std::string, TensorF> out;
  for (const auto& t : m.named_tensors()) out[t.name] = t.value;
  return out;
}

double sample_sd(const TensorF& t) {
  double mean = 0.0;
  for (float v : t.data) mean += v;
  mean /= static_cast<double>(t.numel());
  double var = 0.0;
  for (float v : t.data) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(t.numel()));
}

}  // namespace

TEST_CASE("parameter table: totals, dense share and conv stack") {
  const std::int64_t totals[] = {28481861, 37070405, 54640709, 91354181, 171072581};
  const std::int64_t dense[] = {8454144, 17039360, 34603008, 71303168, 150994944};
  const double share[] = {0.2968, 0.4596, 0.6333, 0.7805, 0.8826};
  const int widths[] = {256, 512, 1024, 2048, 4096};

  for (int i = 0; i < 5; ++i) {
    const ModelConfig cfg = vgg19_preset(widths[i]);
    INFO("head width ", widths[i]);
    CHECK(total_params(cfg) == totals[i]);
    CHECK(head_dense_params(cfg) == dense[i]);
    const double frac =
        static_cast<double>(head_dense_params(cfg)) / static_cast<double>(total_params(cfg));
    CHECK(std::abs(frac - share[i]) <= 0.00005);
    CHECK(conv_stack_params(cfg) == 20024384);
    CHECK(cfg.flatten_size() == 32768);
    CHECK(cfg.spatial_after_blocks() == 8);
  }
}

TEST_CASE("desk preset arithmetic and live parameter count agree") {
  const ModelConfig cfg = desk_preset();
  CHECK(cfg.flatten_size() == 2048);
  CHECK(conv_stack_params(cfg) == 27432);
  CHECK(head_dense_params(cfg) == 135168);
  CHECK(head_bn_params(cfg) == 512);
  CHECK(output_layer_params(cfg) == 325);
  CHECK(total_params(cfg) == 163437);

  Model m(cfg, InitMode::kHe, 1);
  CHECK(m.param_count() == total_params(cfg));
  CHECK(m.conv_layer_count() == 7);
}

TEST_CASE("construction rejects unusable configurations") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 20;  // 20 -> 10 -> 5: third pool impossible
  CHECK_THROWS_AS(Model(cfg, InitMode::kHe, 1), ConfigError);
  cfg = desk_preset();
  cfg.blocks[1].first = 0;
  CHECK_THROWS_AS(Model(cfg, InitMode::kHe, 1), ConfigError);
  cfg = desk_preset();
  cfg.num_classes = 1;
  CHECK_THROWS_AS(Model(cfg, InitMode::kHe, 1), ConfigError);
}

TEST_CASE("forward shapes, input validation and train-mode batch floor") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;  // keep the test light
  Model m(cfg, InitMode::kHe, 7);

  const TensorF x = random_input(cfg, 3, 2);
  const TensorF logits = m.forward(x, ops::Mode::kInfer);
  REQUIRE(logits.shape == std::vector<int>{3, 5});

  TensorF bad({2, 3, 8, 8});
  CHECK_THROWS_AS(m.forward(bad, ops::Mode::kInfer), std::invalid_argument);

  const TensorF one = random_input(cfg, 1, 3);
  CHECK_THROWS_AS(m.forward(one, ops::Mode::kTrain), std::invalid_argument);
  CHECK_NOTHROW(m.forward(one, ops::Mode::kInfer));
}

TEST_CASE("infer mode is pure: rows independent, running stats untouched") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;
  Model m(cfg, InitMode::kHe, 7);

  TensorF x = random_input(cfg, 2, 5);
  std::copy(x.data.begin(), x.data.begin() + x.numel() / 2,
            x.data.begin() + x.numel() / 2);  // row 1 duplicates row 0

  const auto before = by_name(m);
  const TensorF logits = m.forward(x, ops::Mode::kInfer);
  for (int k = 0; k < 5; ++k) {
    CHECK(logits.at(0, k) == logits.at(1, k));
  }
  const auto after = by_name(m);
  for (const auto& [name, t] : before) CHECK(after.at(name).data == t.data);

  // Train mode does move the running estimates.
  m.forward(random_input(cfg, 4, 6), ops::Mode::kTrain);
  CHECK(by_name(m).at("head.bn1.running_mean").data != before.at("head.bn1.running_mean").data);
}

TEST_CASE("initialization: he scale, zero biases, identity batchnorm") {
  const ModelConfig cfg = desk_preset();
  Model m(cfg, InitMode::kHe, 11);
  const auto t = by_name(m);

  CHECK(sample_sd(t.at("conv1_1.weight")) == doctest::Approx(std::sqrt(2.0 / 27.0)).epsilon(0.2));
  CHECK(sample_sd(t.at("head.fc1.weight")) == doctest::Approx(std::sqrt(2.0 / 2048.0)).epsilon(0.05));

  for (const char* name : {"conv1_1.bias", "conv3_3.bias", "head.out.bias", "head.bn1.beta",
                           "head.bn2.beta", "head.bn1.running_mean"}) {
    for (float v : t.at(name).data) CHECK(v == 0.0f);
  }
  for (const char* name : {"head.bn1.gamma", "head.bn2.gamma", "head.bn1.running_var",
                           "head.bn2.running_var"}) {
    for (float v : t.at(name).data) CHECK(v == 1.0f);
  }
}

TEST_CASE("init modes share the head stream and differ only in conv weights") {
  const ModelConfig cfg = desk_preset();
  Model he(cfg, InitMode::kHe, 42);
  Model un(cfg, InitMode::kUnitNormalConv, 42);
  const auto a = by_name(he), b = by_name(un);

  for (const char* name : {"head.fc1.weight", "head.fc2.weight", "head.out.weight"}) {
    CHECK(a.at(name).data == b.at(name).data);
  }
  CHECK(a.at("conv1_1.weight").data != b.at("conv1_1.weight").data);
  CHECK(sample_sd(b.at("conv1_1.weight")) == doctest::Approx(1.0).epsilon(0.2));
  CHECK(sample_sd(b.at("conv3_3.weight")) == doctest::Approx(1.0).epsilon(0.2));

  Model again(cfg, InitMode::kHe, 42);
  CHECK(by_name(again).at("conv2_1.weight").data == a.at("conv2_1.weight").data);
  Model other(cfg, InitMode::kHe, 43);
  CHECK(by_name(other).at("conv2_1.weight").data != a.at("conv2_1.weight").data);
}

TEST_CASE("layer freezing: prefix flags, names, bounds, backward skip") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;
  Model m(cfg, InitMode::kHe, 3);

  m.freeze_layers(3);
  CHECK(m.frozen_layers() == 3);
  CHECK(m.frozen_conv_layers() ==
        std::vector<std::string>{"conv1_1", "conv1_2", "conv2_1"});
  auto params = m.parameters();
  // conv w/b pairs come first in declaration order.
  for (int i = 0; i < 6; ++i) CHECK(params[static_cast<std::size_t>(i)]->frozen);
  for (std::size_t i = 6; i < params.size(); ++i) CHECK_FALSE(params[i]->frozen);

  CHECK_THROWS_AS(m.freeze_layers(8), ConfigError);
  CHECK_THROWS_AS(m.freeze_layers(-1), ConfigError);
  m.freeze_layers(0);
  CHECK(m.frozen_conv_layers().empty());
  for (auto* p : m.parameters()) CHECK_FALSE(p->frozen);

  // Frozen prefix never receives gradients.
  m.freeze_layers(2);
  const TensorF x = random_input(cfg, 2, 9);
  const TensorF logits = m.forward(x, ops::Mode::kTrain);
  const auto batch = ops::softmax_cross_entropy_batch(logits, std::vector<int>{0, 3});
  m.backward(batch.dlogits);
  params = m.parameters();
  const auto all_zero = [](const TensorF& g) {
    return std::all_of(g.data.begin(), g.data.end(), [](float v) { return v == 0.0f; });
  };
  CHECK(all_zero(params[0]->grad));        // conv1_1.weight
  CHECK(all_zero(params[2]->grad));        // conv1_2.weight
  CHECK_FALSE(all_zero(params[4]->grad));  // conv2_1.weight
  CHECK_FALSE(all_zero(m.parameters().back()->grad));
}

TEST_CASE("backward requires a cached train-mode forward") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;
  Model m(cfg, InitMode::kHe, 3);
  TensorF d({2, 5});
  CHECK_THROWS_AS(m.backward(d), std::logic_error);
  m.forward(random_input(cfg, 2, 1), ops::Mode::kInfer);
  CHECK_THROWS_AS(m.backward(d), std::logic_error);
}

TEST_CASE("argmax takes the lower index on ties") {
  TensorF logits({2, 5}, {1, 3, 3, 0, 0, 5, 1, 2, 3, 4});
  CHECK(Model::argmax_rows(logits) == std::vector<int>{1, 0});
}

TEST_CASE("named tensor save/load round trip and error reporting") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;
  Model src(cfg, InitMode::kHe, 21);
  Model dst(cfg, InitMode::kHe, 22);

  const TensorF x = random_input(cfg, 2, 4);
  const TensorF before = dst.forward(x, ops::Mode::kInfer);

  dst.load_named_tensors(src.named_tensors());
  const auto a = by_name(src), b = by_name(dst);
  REQUIRE(a.size() == b.size());
  for (const auto& [name, t] : a) CHECK(b.at(name).data == t.data);
  const TensorF after = dst.forward(x, ops::Mode::kInfer);
  const TensorF ref = src.forward(x, ops::Mode::kInfer);
  CHECK(after.data == ref.data);
  CHECK(after.data != before.data);

  // Missing tensor: named in the error, model untouched.
  auto tensors = src.named_tensors();
  tensors.erase(std::find_if(tensors.begin(), tensors.end(),
                             [](const NamedTensor& t) { return t.name == "head.fc2.weight"; }));
  CHECK_THROWS_WITH_AS(dst.load_named_tensors(tensors),
                       doctest::Contains("head.fc2.weight"), FormatError);
  CHECK(by_name(dst).at("conv1_1.weight").data == a.at("conv1_1.weight").data);

  // Shape mismatch names the offender.
  tensors = src.named_tensors();
  for (auto& t : tensors) {
    if (t.name == "conv1_2.weight") t.value = TensorF::zeros({4});
  }
  CHECK_THROWS_WITH_AS(dst.load_named_tensors(tensors), doctest::Contains("conv1_2.weight"),
                       FormatError);
}

TEST_CASE("conv-stack transfer leaves the head alone") {
  ModelConfig cfg = desk_preset();
  cfg.input_px = 16;
  Model src(cfg, InitMode::kHe, 31);
  Model dst(cfg, InitMode::kHe, 32);
  const auto head_before = by_name(dst).at("head.fc1.weight");

  dst.load_conv_stack(src.named_tensors());
  const auto b = by_name(dst);
  CHECK(b.at("conv1_1.weight").data == by_name(src).at("conv1_1.weight").data);
  CHECK(b.at("conv3_3.bias").data == by_name(src).at("conv3_3.bias").data);
  CHECK(b.at("head.fc1.weight").data == head_before.data);
  CHECK(b.at("head.fc1.weight").data != by_name(src).at("head.fc1.weight").data);
}
