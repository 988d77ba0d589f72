#include "phantomqa/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "phantomqa/errors.hpp"

namespace phantomqa {

namespace {

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

int round_half_away_int(double v) {
  return static_cast<int>(v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5));
}

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

void check_image(const TensorU8& img) {
  if (img.rank() != 2 && img.rank() != 3) {
    throw std::invalid_argument("augment: image must be [H,W] or [C,H,W]");
  }
}

struct Dims {
  int C, H, W;
  std::size_t plane;
};

Dims dims_of(const TensorU8& img) {
  const bool multi = img.rank() == 3;
  const int C = multi ? img.dim(0) : 1;
  const int H = multi ? img.dim(1) : img.dim(0);
  const int W = multi ? img.dim(2) : img.dim(1);
  return {C, H, W, static_cast<std::size_t>(H) * W};
}

// Bilinear read at (sx, sy); out-of-frame corners contribute zero.
double sample_bilinear(const std::uint8_t* plane, int H, int W, double sx, double sy) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    const int y = y0 + dy;
    if (y < 0 || y >= H) continue;
    const double wy = dy ? fy : 1.0 - fy;
    for (int dx = 0; dx <= 1; ++dx) {
      const int x = x0 + dx;
      if (x < 0 || x >= W) continue;
      const double wx = dx ? fx : 1.0 - fx;
      acc += wy * wx * plane[static_cast<std::size_t>(y) * W + x];
    }
  }
  return acc;
}

// One affine resample: output pixel p reads source M*(p - c - t) + c in
// (x, y) = (col, row) coordinates about the image center c.
TensorU8 affine_resample(const TensorU8& img, double m00, double m01, double m10, double m11,
                         double tx, double ty) {
  const Dims d = dims_of(img);
  const double cx = (d.W - 1) / 2.0, cy = (d.H - 1) / 2.0;
  TensorU8 out(img.shape);
  for (int c = 0; c < d.C; ++c) {
    const std::uint8_t* src = img.data.data() + static_cast<std::size_t>(c) * d.plane;
    std::uint8_t* dst = out.data.data() + static_cast<std::size_t>(c) * d.plane;
    for (int y = 0; y < d.H; ++y) {
      const double vy = y - cy - ty;
      for (int x = 0; x < d.W; ++x) {
        const double vx = x - cx - tx;
        const double sx = m00 * vx + m01 * vy + cx;
        const double sy = m10 * vx + m11 * vy + cy;
        dst[static_cast<std::size_t>(y) * d.W + x] =
            clamp_u8(round_half_away_int(sample_bilinear(src, d.H, d.W, sx, sy)));
      }
    }
  }
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  for (double p : {p_hflip, p_vflip, p_rotate, p_scale, p_translate_h, p_translate_v,
                   p_brightness, p_blur}) {
    if (p < 0.0 || p > 1.0) throw ConfigError("augment: effect probability outside [0,1]");
  }
  if (scale_lo <= 0.0 || scale_hi < scale_lo) {
    throw ConfigError("augment: scale range must be positive and ordered");
  }
  if (blur_kernels.empty()) throw ConfigError("augment: blur kernel set is empty");
  for (int k : blur_kernels) {
    if (k % 2 == 0 || k < 3 || k > 7) {
      throw ConfigError("augment: blur kernels must be odd and within [3,7], got " +
                        std::to_string(k));
    }
  }
  if (rotation_range_deg < 0.0 || translate_frac < 0.0 || brightness_frac < 0.0) {
    throw ConfigError("augment: ranges must be nonnegative");
  }
}

AugmentParams draw_augment_params(const AugmentConfig& cfg, int size_px, RngState& rng) {
  AugmentParams p;
  p.hflip = rng.next_bool(cfg.p_hflip);
  p.vflip = rng.next_bool(cfg.p_vflip);
  p.rotate = rng.next_bool(cfg.p_rotate);
  p.angle_deg = cfg.rotation_range_deg * (2.0 * rng.next_uniform() - 1.0);
  p.scale = rng.next_bool(cfg.p_scale);
  p.scale_factor = cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * rng.next_uniform();
  p.translate_x = rng.next_bool(cfg.p_translate_h);
  p.tx_px = (2.0 * rng.next_uniform() - 1.0) * cfg.translate_frac * size_px;
  p.translate_y = rng.next_bool(cfg.p_translate_v);
  p.ty_px = (2.0 * rng.next_uniform() - 1.0) * cfg.translate_frac * size_px;
  p.brightness = rng.next_bool(cfg.p_brightness);
  p.delta_levels = (2.0 * rng.next_uniform() - 1.0) * cfg.brightness_frac * 255.0;
  p.blur = rng.next_bool(cfg.p_blur);
  p.blur_len = cfg.blur_kernels[static_cast<std::size_t>(
      rng.next_below(static_cast<std::uint64_t>(cfg.blur_kernels.size())))];
  p.blur_angle_deg = 180.0 * rng.next_uniform();
  return p;
}

TensorU8 apply_augment_params(const TensorU8& img, const AugmentParams& params) {
  check_image(img);
  TensorU8 out = img;

  const bool geometric = params.hflip || params.vflip || params.rotate || params.scale ||
                         params.translate_x || params.translate_y;
  if (geometric) {
    // Stage order hflip, vflip, rotate, scale, translate; the source lookup
    // therefore composes Mh * Mv * R(-theta) * ((p - c - t) / s).
    const double theta = params.rotate ? deg2rad(params.angle_deg) : 0.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double s = params.scale ? params.scale_factor : 1.0;
    double m00 = ct / s, m01 = st / s;
    double m10 = -st / s, m11 = ct / s;
    if (params.hflip) {
      m00 = -m00;
      m01 = -m01;
    }
    if (params.vflip) {
      m10 = -m10;
      m11 = -m11;
    }
    out = affine_resample(img, m00, m01, m10, m11, params.translate_x ? params.tx_px : 0.0,
                          params.translate_y ? params.ty_px : 0.0);
  }

  if (params.brightness) {
    const int delta = round_half_away_int(params.delta_levels);
    if (delta != 0) {
      for (auto& v : out.data) v = clamp_u8(static_cast<int>(v) + delta);
    }
  }

  if (params.blur) out = motion_blur(out, params.blur_len, params.blur_angle_deg);
  return out;
}

TensorU8 apply_augment(const TensorU8& img, const AugmentConfig& cfg, RngState rng) {
  if (!cfg.enabled) return img;
  const int size = img.dim(img.rank() - 1);
  const AugmentParams p = draw_augment_params(cfg, size, rng);
  return apply_augment_params(img, p);
}

TensorU8 hflip(const TensorU8& img) {
  AugmentParams p;
  p.hflip = true;
  return apply_augment_params(img, p);
}

TensorU8 vflip(const TensorU8& img) {
  AugmentParams p;
  p.vflip = true;
  return apply_augment_params(img, p);
}

TensorU8 rotate(const TensorU8& img, double angle_deg) {
  AugmentParams p;
  p.rotate = true;
  p.angle_deg = angle_deg;
  return apply_augment_params(img, p);
}

TensorU8 scale(const TensorU8& img, double factor) {
  if (factor <= 0.0) throw std::invalid_argument("scale: factor must be positive");
  AugmentParams p;
  p.scale = true;
  p.scale_factor = factor;
  return apply_augment_params(img, p);
}

TensorU8 translate(const TensorU8& img, double dx_px, double dy_px) {
  AugmentParams p;
  p.translate_x = p.translate_y = true;
  p.tx_px = dx_px;
  p.ty_px = dy_px;
  return apply_augment_params(img, p);
}

TensorU8 brightness(const TensorU8& img, double delta_levels) {
  AugmentParams p;
  p.brightness = true;
  p.delta_levels = delta_levels;
  return apply_augment_params(img, p);
}

TensorU8 motion_blur(const TensorU8& img, int k, double angle_deg) {
  check_image(img);
  if (k % 2 == 0 || k < 1) {
    throw std::invalid_argument("motion_blur: kernel length must be odd, got " +
                                std::to_string(k));
  }
  const Dims d = dims_of(img);
  // 1-pixel-wide line of k taps through the kernel center at the given
  // angle; each tap weighs 1/k. Reflected borders (index -1 mirrors to 0).
  const double ct = std::cos(deg2rad(angle_deg)), st = std::sin(deg2rad(angle_deg));
  std::vector<std::pair<int, int>> taps;  // (dx, dy)
  for (int t = -(k / 2); t <= k / 2; ++t) {
    taps.emplace_back(round_half_away_int(t * ct), round_half_away_int(t * st));
  }
  const auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
  };
  TensorU8 out(img.shape);
  for (int c = 0; c < d.C; ++c) {
    const std::uint8_t* src = img.data.data() + static_cast<std::size_t>(c) * d.plane;
    std::uint8_t* dst = out.data.data() + static_cast<std::size_t>(c) * d.plane;
    for (int y = 0; y < d.H; ++y) {
      for (int x = 0; x < d.W; ++x) {
        int s = 0;
        for (const auto& [dx, dy] : taps) {
          s += src[static_cast<std::size_t>(reflect(y + dy, d.H)) * d.W + reflect(x + dx, d.W)];
        }
        dst[static_cast<std::size_t>(y) * d.W + x] =
            clamp_u8(round_half_away_int(static_cast<double>(s) / k));
      }
    }
  }
  return out;
}

}  // namespace phantomqa
