#pragma once

#include <filesystem>
#include <vector>

#include "phantomqa/binio.hpp"
#include "phantomqa/simulate.hpp"

namespace phantomqa {

// On-disk slice storage: a flat record stream per series plus one JSON
// manifest per dataset. Each record is self-describing (magic, version,
// dimensions, pixel type) so a stream can be scanned without the manifest;
// the manifest adds labels, positions and the generation parameters.

inline constexpr std::uint16_t kPixelI16Hu = 0;
inline constexpr std::uint16_t kPixelU8 = 1;

void encode_slice_record(binio::Writer& w, const TensorI16& img);
void encode_slice_record(binio::Writer& w, const TensorU8& img);

// Decodes one record at the reader's position. Returns the pixel type and
// fills the matching output (the other is untouched). Bad magic, version or
// pixel code throw FormatError; short payloads cite the missing byte count.
std::uint16_t decode_slice_record(binio::Reader& r, TensorI16* i16, TensorU8* u8);

// Writes <split>_<index>.phsl per series plus manifest.json into dir.
void save_dataset(const std::filesystem::path& dir, const SplitSet& splits);

// Rebuilds the splits from dir; slice payloads round-trip bitwise and the
// generation parameters are restored from the manifest.
SplitSet load_dataset(const std::filesystem::path& dir);

}  // namespace phantomqa
