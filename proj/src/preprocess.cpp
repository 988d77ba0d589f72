#include "phantomqa/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phantomqa {

namespace {

double round_half_away(double v) {
  return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
}

}  // namespace

TensorI16 downsample(const TensorI16& in) {
  if (in.rank() != 2) throw std::invalid_argument("downsample: input must be [H,W]");
  const int H = in.dim(0), W = in.dim(1);
  if (H % 2 != 0 || W % 2 != 0) {
    throw std::invalid_argument("downsample: dimensions must be even, got " +
                                std::to_string(H) + "x" + std::to_string(W));
  }
  TensorI16 out({H / 2, W / 2});
  for (int r = 0; r < H / 2; ++r) {
    for (int c = 0; c < W / 2; ++c) {
      const int s = in.at(2 * r, 2 * c) + in.at(2 * r, 2 * c + 1) + in.at(2 * r + 1, 2 * c) +
                    in.at(2 * r + 1, 2 * c + 1);
      out.at(r, c) = static_cast<std::int16_t>(round_half_away(s / 4.0));
    }
  }
  return out;
}

TensorI16 downsample_to(const TensorI16& in, int target_px) {
  if (in.rank() != 2 || in.dim(0) != in.dim(1)) {
    throw std::invalid_argument("downsample_to: input must be square [A,A]");
  }
  if (target_px <= 0) throw std::invalid_argument("downsample_to: target must be positive");
  int size = in.dim(0);
  int steps = 0;
  while (size > target_px && size % 2 == 0) {
    size /= 2;
    ++steps;
  }
  if (size != target_px) {
    throw std::invalid_argument("downsample_to: cannot reach " + std::to_string(target_px) +
                                " px from " + std::to_string(in.dim(0)) + " px by halving");
  }
  TensorI16 cur = in;
  for (int i = 0; i < steps; ++i) cur = downsample(cur);
  return cur;
}

std::uint8_t window_hu_value(double hu) {
  const double v = std::clamp(hu, kWindowLoHu, kWindowHiHu);
  const double scaled = 255.0 * (v - kWindowLoHu) / (kWindowHiHu - kWindowLoHu);
  return static_cast<std::uint8_t>(round_half_away(scaled));
}

TensorU8 window_hu(const TensorI16& in) {
  TensorU8 out(in.shape);
  for (std::int64_t i = 0; i < in.numel(); ++i) {
    out[i] = window_hu_value(static_cast<double>(in[i]));
  }
  return out;
}

ProcessedSeries preprocess_series(const LabeledSeries& series, int working_px, int series_id) {
  ProcessedSeries out;
  out.series_id = series_id;
  out.slices.reserve(series.slices.size());
  for (const LabeledSlice& s : series.slices) {
    out.slices.push_back(window_hu(downsample_to(s.hu, working_px)));
    out.labels.push_back(s.label);
    out.transition_dist_mm.push_back(s.transition_dist_mm);
  }
  return out;
}

TensorU8 stack_axial_slices(const std::vector<TensorU8>& slices, int index) {
  if (slices.empty()) throw std::invalid_argument("stack_axial: empty series");
  const int n = static_cast<int>(slices.size());
  if (index < 0 || index >= n) {
    throw std::invalid_argument("stack_axial: index " + std::to_string(index) +
                                " out of range for " + std::to_string(n) + " slices");
  }
  const TensorU8& central = slices[static_cast<std::size_t>(index)];
  const TensorU8& prev = slices[static_cast<std::size_t>(std::max(0, index - 1))];
  const TensorU8& next = slices[static_cast<std::size_t>(std::min(n - 1, index + 1))];
  if (!prev.same_shape(central) || !next.same_shape(central) || central.rank() != 2) {
    throw std::invalid_argument("stack_axial: slices must share one 2-d shape");
  }
  const int H = central.dim(0), W = central.dim(1);
  TensorU8 out({3, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::copy(prev.data.begin(), prev.data.end(), out.data.begin());
  std::copy(central.data.begin(), central.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(plane));
  std::copy(next.data.begin(), next.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(2 * plane));
  return out;
}

TensorU8 stack_triplicate_slice(const TensorU8& slice) {
  if (slice.rank() != 2) throw std::invalid_argument("stack_triplicate: slice must be [H,W]");
  const int H = slice.dim(0), W = slice.dim(1);
  TensorU8 out({3, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < 3; ++c) {
    std::copy(slice.data.begin(), slice.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  return out;
}

ModelInput stack_axial(const ProcessedSeries& series, int index) {
  ModelInput in;
  in.channels = stack_axial_slices(series.slices, index);
  in.label = series.labels[static_cast<std::size_t>(index)];
  in.series_id = series.series_id;
  in.slice_index = index;
  return in;
}

ModelInput stack_triplicate(const ProcessedSeries& series, int index) {
  if (index < 0 || index >= static_cast<int>(series.slices.size())) {
    throw std::invalid_argument("stack_triplicate: index out of range");
  }
  ModelInput in;
  in.channels = stack_triplicate_slice(series.slices[static_cast<std::size_t>(index)]);
  in.label = series.labels[static_cast<std::size_t>(index)];
  in.series_id = series.series_id;
  in.slice_index = index;
  return in;
}

TensorF to_float(const TensorU8& stacked) {
  TensorF out(stacked.shape);
  for (std::int64_t i = 0; i < stacked.numel(); ++i) {
    out[i] = static_cast<float>(stacked[i]) / 255.0f - 0.5f;
  }
  return out;
}

}  // namespace phantomqa
