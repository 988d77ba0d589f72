#pragma once

#include <vector>

#include "phantomqa/rng.hpp"
#include "phantomqa/tensor.hpp"

namespace phantomqa {

// Training-time augmentation on u8 image stacks. Eight effects (hflip,
// vflip, rotate, scale, translate-h, translate-v, brightness, motion blur),
// each independently active with its own probability, drawn and applied in
// that fixed order. All channels of a stack share one draw. The geometric
// effects compose into a single affine map resolved by one bilinear
// resampling pass with zero fill outside the source frame.

struct AugmentConfig {
  bool enabled = true;
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double p_rotate = 0.5;
  double p_scale = 0.5;
  double p_translate_h = 0.5;
  double p_translate_v = 0.5;
  double p_brightness = 0.5;
  double p_blur = 0.5;
  double rotation_range_deg = 90.0;  // theta ~ U[-range, +range]
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double translate_frac = 0.2;    // of image size, per axis
  double brightness_frac = 0.005;  // of the 8-bit range
  std::vector<int> blur_kernels = {3, 5, 7};

  void validate() const;  // throws ConfigError
};

struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  bool rotate = false;
  double angle_deg = 0.0;
  bool scale = false;
  double scale_factor = 1.0;
  bool translate_x = false;
  double tx_px = 0.0;
  bool translate_y = false;
  double ty_px = 0.0;
  bool brightness = false;
  double delta_levels = 0.0;
  bool blur = false;
  int blur_len = 3;
  double blur_angle_deg = 0.0;
};

// Consumes draws in the fixed effect order; inactive effects still consume
// their magnitude draws so the stream layout does not depend on the flags.
AugmentParams draw_augment_params(const AugmentConfig& cfg, int size_px, RngState& rng);

// img is [H,W] or [C,H,W]; channels are transformed identically.
TensorU8 apply_augment_params(const TensorU8& img, const AugmentParams& params);

// Draw-and-apply. With cfg.enabled == false this is the identity.
TensorU8 apply_augment(const TensorU8& img, const AugmentConfig& cfg, RngState rng);

// Single-effect entry points (the primitives behind apply_augment).
TensorU8 hflip(const TensorU8& img);
TensorU8 vflip(const TensorU8& img);
TensorU8 rotate(const TensorU8& img, double angle_deg);
TensorU8 scale(const TensorU8& img, double factor);
TensorU8 translate(const TensorU8& img, double dx_px, double dy_px);
TensorU8 brightness(const TensorU8& img, double delta_levels);
TensorU8 motion_blur(const TensorU8& img, int k, double angle_deg);

}  // namespace phantomqa
