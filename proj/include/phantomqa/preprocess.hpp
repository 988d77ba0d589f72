#pragma once

#include <vector>

#include "phantomqa/labels.hpp"
#include "phantomqa/simulate.hpp"
#include "phantomqa/tensor.hpp"

namespace phantomqa {

// Slice-to-network-input pipeline: HU raster -> downsample in HU space ->
// window to 8-bit -> 3-channel stack -> float in [-0.5, 0.5]. Downsampling
// happens before windowing so values are quantized once.

// Fixed display window applied before u8 conversion.
inline constexpr double kWindowLoHu = -1024.0;
inline constexpr double kWindowHiHu = 1187.0;

// One 2x2 block-mean halving (round half away from zero); even dims only.
TensorI16 downsample(const TensorI16& in);

// Repeated halving until the square input reaches target px; the input
// size must be target * 2^k.
TensorI16 downsample_to(const TensorI16& in, int target_px);

// Clamp to the window and map linearly onto 0..255, round half away.
TensorU8 window_hu(const TensorI16& in);
std::uint8_t window_hu_value(double hu);

// A processed series: windowed u8 slices plus per-slice ground truth.
struct ProcessedSeries {
  std::vector<TensorU8> slices;
  std::vector<SliceLabel> labels;
  std::vector<double> transition_dist_mm;
  int series_id = 0;
};

ProcessedSeries preprocess_series(const LabeledSeries& series, int working_px,
                                  int series_id = 0);

// Network input: 3 u8 channels, labeled by the central slice.
struct ModelInput {
  TensorU8 channels;  // [3,S,S]
  SliceLabel label = SliceLabel::kOoP;
  int series_id = 0;
  int slice_index = 0;
};

// Channels (previous, central, next); series ends clamp to the edge slice.
ModelInput stack_axial(const ProcessedSeries& series, int index);
// Central slice copied onto all 3 channels (no axial context).
ModelInput stack_triplicate(const ProcessedSeries& series, int index);

// Raw-tensor stacking primitives behind the ModelInput builders.
TensorU8 stack_axial_slices(const std::vector<TensorU8>& slices, int index);
TensorU8 stack_triplicate_slice(const TensorU8& slice);

// u8 [C,H,W] -> float: x / 255 - 0.5.
TensorF to_float(const TensorU8& stacked);

}  // namespace phantomqa
