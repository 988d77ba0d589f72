#include "phantomqa/dataset_io.hpp"

#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "phantomqa/config.hpp"
#include "phantomqa/errors.hpp"

namespace phantomqa {

namespace {

constexpr char kMagic[4] = {'P', 'H', 'S', 'L'};
constexpr std::uint16_t kVersion = 1;

void encode_header(binio::Writer& w, int height, int width, std::uint16_t pixel) {
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u16(static_cast<std::uint16_t>(width));
  w.u16(static_cast<std::uint16_t>(height));
  w.u16(pixel);
}

template <typename T>
void check_dims(const Tensor<T>& img) {
  if (img.rank() != 2 || img.dim(0) > 0xFFFF || img.dim(1) > 0xFFFF) {
    throw FormatError("slice record: image must be 2-d with dims below 65536, got " +
                      img.shape_str());
  }
}

}  // namespace

void encode_slice_record(binio::Writer& w, const TensorI16& img) {
  check_dims(img);
  encode_header(w, img.dim(0), img.dim(1), kPixelI16Hu);
  w.bytes(img.data.data(), img.data.size() * sizeof(std::int16_t));
}

void encode_slice_record(binio::Writer& w, const TensorU8& img) {
  check_dims(img);
  encode_header(w, img.dim(0), img.dim(1), kPixelU8);
  w.bytes(img.data.data(), img.data.size());
}

std::uint16_t decode_slice_record(binio::Reader& r, TensorI16* i16, TensorU8* u8) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("slice record: bad magic, not a slice stream");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError("slice record: version " + std::to_string(version) + ", expected " +
                      std::to_string(kVersion));
  }
  const int width = r.u16();
  const int height = r.u16();
  const std::uint16_t pixel = r.u16();
  if (width == 0 || height == 0) throw FormatError("slice record: zero dimension");
  if (pixel == kPixelI16Hu) {
    if (i16 == nullptr) throw FormatError("slice record: unexpected HU payload");
    *i16 = TensorI16({height, width});
    r.bytes(i16->data.data(), i16->data.size() * sizeof(std::int16_t));
  } else if (pixel == kPixelU8) {
    if (u8 == nullptr) throw FormatError("slice record: unexpected u8 payload");
    *u8 = TensorU8({height, width});
    r.bytes(u8->data.data(), u8->data.size());
  } else {
    throw FormatError("slice record: unknown pixel code " + std::to_string(pixel));
  }
  return pixel;
}

namespace {

nlohmann::json save_series(const std::filesystem::path& dir, const std::string& name,
                           const LabeledSeries& series) {
  binio::Writer w;
  nlohmann::json slices = nlohmann::json::array();
  for (const LabeledSlice& s : series.slices) {
    nlohmann::json rec = {{"offset", w.size()},
                          {"label", to_string(s.label)},
                          {"z_mm", s.z_center_mm},
                          {"transition_dist_mm", s.transition_dist_mm}};
    slices.push_back(std::move(rec));
    encode_slice_record(w, s.hu);
  }
  binio::write_file_atomic(dir / (name + ".phsl"), w.data());
  return {{"file", name + ".phsl"},
          {"phantom", series.phantom},
          {"acquisition", series.acq},
          {"artifacts", series.artifacts},
          {"slices", std::move(slices)}};
}

LabeledSeries load_series(const std::filesystem::path& dir, const nlohmann::json& entry) {
  LabeledSeries series;
  series.phantom = entry.at("phantom").get<PhantomSpec>();
  series.acq = entry.at("acquisition").get<AcquisitionSpec>();
  series.artifacts = entry.at("artifacts").get<ArtifactSpec>();
  const std::filesystem::path file = dir / entry.at("file").get<std::string>();
  const std::vector<std::uint8_t> buf = binio::read_file(file);
  binio::Reader r(buf, file.string());
  for (const nlohmann::json& rec : entry.at("slices")) {
    LabeledSlice slice;
    r.seek(rec.at("offset").get<std::size_t>());
    decode_slice_record(r, &slice.hu, nullptr);
    slice.label = label_from_string(rec.at("label").get<std::string>());
    slice.z_center_mm = rec.at("z_mm").get<double>();
    slice.transition_dist_mm = rec.at("transition_dist_mm").get<double>();
    series.slices.push_back(std::move(slice));
  }
  return series;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const SplitSet& splits) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest = {{"format", "phantom-slice-dataset"},
                             {"version", 1},
                             {"class_order", kClassNames}};
  const auto store = [&](const char* split, const std::vector<LabeledSeries>& series) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < series.size(); ++i) {
      arr.push_back(save_series(dir, std::string(split) + "_" + std::to_string(i), series[i]));
    }
    manifest["splits"][split] = std::move(arr);
  };
  store("train", splits.train);
  store("val", splits.val);
  store("test", splits.test);
  store("extreme", splits.extreme);
  binio::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

SplitSet load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open " + mpath.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
  try {
    if (manifest.at("format").get<std::string>() != "phantom-slice-dataset") {
      throw FormatError(mpath.string() + ": not a slice dataset manifest");
    }
    const auto order = manifest.at("class_order").get<std::vector<std::string>>();
    for (int i = 0; i < kNumClasses; ++i) {
      if (order.size() != kNumClasses || order[static_cast<std::size_t>(i)] != kClassNames[i]) {
        throw FormatError(mpath.string() + ": class order does not match this build");
      }
    }
    SplitSet out;
    const auto& splits = manifest.at("splits");
    const auto read = [&](const char* split, std::vector<LabeledSeries>& dst) {
      for (const nlohmann::json& entry : splits.at(split)) {
        dst.push_back(load_series(dir, entry));
      }
    };
    read("train", out.train);
    read("val", out.val);
    read("test", out.test);
    read("extreme", out.extreme);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
}

}  // namespace phantomqa
