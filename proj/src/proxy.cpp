#include "phantomqa/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "phantomqa/errors.hpp"
#include "phantomqa/preprocess.hpp"

namespace phantomqa {

namespace {

constexpr std::int16_t kAir = -1000;

struct Shape {
  int cls = 0;  // 0 disc, 1 annulus, 2 rod ring, 3 bar, 4 ellipse
  double cx = 0, cy = 0;
  double a = 0, b = 0;      // primary / secondary extent, px
  double angle = 0;         // radians, bar and ellipse
  double hu = 0;
  double rod_hu[4] = {0, 0, 0, 0};
  double area() const {
    switch (cls) {
      case 0:
      case 2:
        return std::numbers::pi * a * a;
      case 1:
        return std::numbers::pi * (a * a - b * b);
      case 3:
        return 4.0 * a * b;
      default:
        return std::numbers::pi * a * b;
    }
  }
};

Shape draw_shape(int size_px, RngState& rng) {
  const double S = size_px;
  Shape s;
  s.cls = static_cast<int>(rng.next_below(5));
  s.cx = rng.next_uniform(0.25, 0.75) * S;
  s.cy = rng.next_uniform(0.25, 0.75) * S;
  s.hu = rng.next_uniform(-450.0, 450.0);
  switch (s.cls) {
    case 0:  // disc
      s.a = rng.next_uniform(0.10, 0.32) * S;
      break;
    case 1:  // annulus: a outer, b inner radius
      s.a = rng.next_uniform(0.14, 0.36) * S;
      s.b = s.a * rng.next_uniform(0.45, 0.8);
      break;
    case 2: {  // body disc with 4 small rods on a half-radius ring
      s.a = rng.next_uniform(0.16, 0.34) * S;
      for (double& r : s.rod_hu) {
        const double sign = rng.next_bool(0.5) ? 1.0 : -1.0;
        r = s.hu + sign * rng.next_uniform(200.0, 650.0);
      }
      break;
    }
    case 3:  // bar: half extents, rotated
      s.a = rng.next_uniform(0.12, 0.34) * S;
      s.b = s.a * rng.next_uniform(0.2, 0.5);
      s.angle = rng.next_uniform() * std::numbers::pi;
      break;
    default:  // ellipse with a visible axis ratio
      s.a = rng.next_uniform(0.14, 0.34) * S;
      s.b = s.a * rng.next_uniform(0.4, 0.7);
      s.angle = rng.next_uniform() * std::numbers::pi;
      break;
  }
  return s;
}

void paint(TensorI16& img, const Shape& s) {
  const int S = img.dim(0);
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double dx = x + 0.5 - s.cx, dy = y + 0.5 - s.cy;
      double hu;
      switch (s.cls) {
        case 0: {
          if (dx * dx + dy * dy > s.a * s.a) continue;
          hu = s.hu;
          break;
        }
        case 1: {
          const double d2 = dx * dx + dy * dy;
          if (d2 > s.a * s.a || d2 < s.b * s.b) continue;
          hu = s.hu;
          break;
        }
        case 2: {
          if (dx * dx + dy * dy > s.a * s.a) continue;
          hu = s.hu;
          const double ring = 0.5 * s.a, rod = 0.18 * s.a;
          for (int j = 0; j < 4; ++j) {
            const double aj = j * std::numbers::pi / 2.0;
            const double rx = dx - ring * std::cos(aj), ry = dy - ring * std::sin(aj);
            if (rx * rx + ry * ry <= rod * rod) {
              hu = s.rod_hu[j];
              break;
            }
          }
          break;
        }
        case 3: {
          const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
          if (std::abs(u) > s.a || std::abs(v) > s.b) continue;
          hu = s.hu;
          break;
        }
        default: {
          const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
          if ((u * u) / (s.a * s.a) + (v * v) / (s.b * s.b) > 1.0) continue;
          hu = s.hu;
          break;
        }
      }
      img.at(y, x) = static_cast<std::int16_t>(std::clamp(hu, -1000.0, 3000.0));
    }
  }
}

}  // namespace

ProxyScene render_proxy_scene(int size_px, int max_shapes, RngState rng) {
  if (size_px <= 0 || max_shapes < 1) {
    throw ConfigError("proxy scene: size and shape count must be positive");
  }
  const int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_shapes)));
  std::vector<Shape> shapes;
  shapes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) shapes.push_back(draw_shape(size_px, rng));
  // Ascending area: the dominant shape paints last and stays fully visible,
  // so the label is always recoverable from the image.
  std::stable_sort(shapes.begin(), shapes.end(),
                   [](const Shape& l, const Shape& r) { return l.area() < r.area(); });

  ProxyScene scene;
  scene.hu = TensorI16::full({size_px, size_px}, kAir);
  for (const Shape& s : shapes) paint(scene.hu, s);
  scene.label = shapes.back().cls;
  return scene;
}

Dataset proxy_dataset(int scenes, int size_px, int max_shapes, RngState rng) {
  Dataset out;
  for (int i = 0; i < scenes; ++i) {
    // Render at 2x and pass through the halving/windowing pipeline the real
    // slices use.
    ProxyScene scene =
        render_proxy_scene(2 * size_px, max_shapes, rng.substream(static_cast<std::uint64_t>(i)));
    ModelInput in;
    in.channels = stack_triplicate_slice(window_hu(downsample(scene.hu)));
    in.label = static_cast<SliceLabel>(scene.label);  // class slot, not a slice class
    in.series_id = -1;
    in.slice_index = i;
    out.samples.push_back(std::move(in));
    out.transition_dist_mm.push_back(0.0);
  }
  return out;
}

ProxyResult pretrain_proxy(const ModelConfig& arch, const ProxyConfig& cfg) {
  if (cfg.train_scenes < 64 || cfg.val_scenes < 16) {
    throw ConfigError("proxy: too few scenes to train on");
  }
  RngState root(cfg.seed);
  const Dataset train_set =
      proxy_dataset(cfg.train_scenes, arch.input_px, cfg.max_shapes, root.substream(1));
  const Dataset val_set =
      proxy_dataset(cfg.val_scenes, arch.input_px, cfg.max_shapes, root.substream(2));

  Model model(arch, InitMode::kHe, root.substream(3).seed());
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.adam = cfg.adam;
  tc.augment = false;  // scene variety substitutes for augmentation here
  tc.stack = StackMode::kTriplicate;
  tc.seed = root.substream(4).seed();

  ProxyResult result;
  result.epochs = train(model, train_set, val_set, tc);
  result.val_acc = result.epochs.back().val_acc;
  result.donor = checkpoint_from_model(model, /*donor=*/true);
  return result;
}

}  // namespace phantomqa
