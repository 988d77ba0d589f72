#include "phantomqa/checkpoint.hpp"

#include <cstring>

#include "phantomqa/binio.hpp"
#include "phantomqa/errors.hpp"

namespace phantomqa {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'K', 'P'};
constexpr std::uint16_t kVersion = 1;

// Architecture as a flat numeric tensor so it rides the regular tensor list:
// [layout version, input_px, in_channels, num_classes, head_width,
//  bn_momentum, bn_eps, n_blocks, convs_1, channels_1, ...].
// The integral entries are small enough for exact f32 storage, and the
// model consumes momentum/eps at f32 precision anyway.
TensorF encode_arch(const ModelConfig& cfg) {
  std::vector<float> v = {1.0f,
                          static_cast<float>(cfg.input_px),
                          static_cast<float>(cfg.in_channels),
                          static_cast<float>(cfg.num_classes),
                          static_cast<float>(cfg.head_width),
                          static_cast<float>(cfg.bn_momentum),
                          static_cast<float>(cfg.bn_eps),
                          static_cast<float>(cfg.blocks.size())};
  for (const auto& [convs, ch] : cfg.blocks) {
    v.push_back(static_cast<float>(convs));
    v.push_back(static_cast<float>(ch));
  }
  const int n = static_cast<int>(v.size());
  return TensorF({n}, std::move(v));
}

ModelConfig decode_arch(const TensorF& t, const std::string& origin) {
  const auto bad = [&](const std::string& why) {
    return FormatError(origin + ": meta.arch " + why);
  };
  if (t.rank() != 1 || t.numel() < 8) throw bad("tensor is malformed");
  if (t[0] != 1.0f) throw bad("layout version " + std::to_string(t[0]) + " unknown");
  ModelConfig cfg;
  cfg.input_px = static_cast<int>(t[1]);
  cfg.in_channels = static_cast<int>(t[2]);
  cfg.num_classes = static_cast<int>(t[3]);
  cfg.head_width = static_cast<int>(t[4]);
  cfg.bn_momentum = static_cast<double>(t[5]);
  cfg.bn_eps = static_cast<double>(t[6]);
  const int nb = static_cast<int>(t[7]);
  if (nb < 0 || t.numel() != 8 + 2 * nb) throw bad("block list length mismatch");
  cfg.blocks.clear();
  for (int b = 0; b < nb; ++b) {
    cfg.blocks.emplace_back(static_cast<int>(t[8 + 2 * b]), static_cast<int>(t[9 + 2 * b]));
  }
  return cfg;
}

void encode_tensor(binio::Writer& w, const std::string& name, const TensorF& t) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.text(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  w.bytes(t.data.data(), t.data.size() * sizeof(float));
}

NamedTensor decode_tensor(binio::Reader& r) {
  const std::uint32_t name_len = r.u32();
  std::string name = r.text(name_len);
  const std::uint32_t rank = r.u32();
  std::vector<int> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(r.u32());
  TensorF t(shape);
  r.bytes(t.data.data(), t.data.size() * sizeof(float));
  return {std::move(name), std::move(t)};
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  binio::Writer w;
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size() + 2));
  encode_tensor(w, "meta.arch", encode_arch(ckpt.arch));
  encode_tensor(w, "meta.donor", TensorF({1}, {ckpt.donor ? 1.0f : 0.0f}));
  for (const NamedTensor& t : ckpt.tensors) encode_tensor(w, t.name, t.value);
  return w.data();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& buf, const std::string& origin) {
  binio::Reader r(buf, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(origin + ": bad magic, not a checkpoint file");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError(origin + ": checkpoint version " + std::to_string(version) +
                      ", expected " + std::to_string(kVersion));
  }
  const std::uint32_t count = r.u32();
  Checkpoint ckpt;
  bool have_arch = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t = decode_tensor(r);
    if (t.name == "meta.arch") {
      ckpt.arch = decode_arch(t.value, origin);
      have_arch = true;
    } else if (t.name == "meta.donor") {
      if (t.value.numel() != 1) throw FormatError(origin + ": meta.donor is malformed");
      ckpt.donor = t.value[0] != 0.0f;
    } else {
      ckpt.tensors.push_back(std::move(t));
    }
  }
  r.expect_end();
  if (!have_arch) throw FormatError(origin + ": missing meta.arch tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  binio::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(binio::read_file(path), path.string());
}

Checkpoint checkpoint_from_model(const Model& model, bool donor) {
  Checkpoint ckpt;
  ckpt.arch = model.config();
  ckpt.donor = donor;
  for (NamedTensor& t : model.named_tensors()) {
    if (donor && t.name.rfind("conv", 0) != 0) continue;
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.donor) {
    throw FormatError(
        "donor checkpoint holds only the conv stack; construct a model and transfer into it");
  }
  Model model(ckpt.arch, InitMode::kHe, 0);
  model.load_named_tensors(ckpt.tensors);
  return model;
}

void transfer_conv_stack(Model& model, const Checkpoint& ckpt) {
  model.load_conv_stack(ckpt.tensors);
}

}  // namespace phantomqa
