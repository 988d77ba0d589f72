#include "phantomqa/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "phantomqa/errors.hpp"

namespace phantomqa {

namespace {

constexpr double kAirHu = -1000.0;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

double round_half_away(double v) {
  return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
}

// R = Rx(tx) * Ry(ty); apply_transposed maps world offsets into the phantom
// frame (R is orthonormal, so R^T = R^-1).
struct Rotation {
  std::array<std::array<double, 3>, 3> m;
  static Rotation from_acq(const AcquisitionSpec& acq) {
    const double tx = deg2rad(acq.tilt_x_deg), ty = deg2rad(acq.tilt_y_deg);
    const double cx = std::cos(tx), sx = std::sin(tx);
    const double cy = std::cos(ty), sy = std::sin(ty);
    return {{{{cy, 0.0, sy}, {sx * sy, cx, -sx * cy}, {-cx * sy, sx, cx * cy}}}};
  }
  std::array<double, 3> apply_transposed(const std::array<double, 3>& v) const {
    return {m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
            m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2]};
  }
};

// Air gap resolved to an axial extent in the phantom frame.
struct ResolvedGap {
  double z0, z1;
  double severity;
  bool removes_material(double body_hu) const { return severity >= body_hu + 1000.0; }
};

std::vector<ResolvedGap> resolve_gaps(const PhantomSpec& phantom, const ArtifactSpec& art) {
  const std::vector<double> ifaces = phantom.interfaces();
  std::vector<ResolvedGap> out;
  out.reserve(art.air_gaps.size());
  for (const AirGap& g : art.air_gaps) {
    if (g.interface_index < 0 || g.interface_index >= static_cast<int>(ifaces.size())) {
      throw ConfigError("air gap interface index " + std::to_string(g.interface_index) +
                        " out of range (phantom has " + std::to_string(ifaces.size()) +
                        " interfaces)");
    }
    if (g.extent_mm <= 0.0) throw ConfigError("air gap extent must be positive");
    const double c = ifaces[static_cast<std::size_t>(g.interface_index)];
    out.push_back({c - g.extent_mm / 2.0, c + g.extent_mm / 2.0, g.severity_hu_drop});
  }
  return out;
}

// HU of the phantom solid at a phantom-frame point. Returns false when the
// point holds no material (outside the body, or inside a full air gap).
bool sample_phantom(const PhantomSpec& ph, const std::vector<ResolvedGap>& gaps, double lx,
                    double ly, double lz, double* hu) {
  if (lz < 0.0 || lz > ph.length()) return false;
  const int si = ph.section_at(lz);
  if (si < 0) return false;
  const Section& sec = ph.sections[static_cast<std::size_t>(si)];
  const double r = sec.radius_at(lz);
  if (lx * lx + ly * ly > r * r) return false;

  for (const ResolvedGap& g : gaps) {
    if (lz >= g.z0 && lz <= g.z1) {
      if (g.removes_material(ph.body_hu)) return false;
      // Partial gap: hollowed body material, inserts suppressed.
      *hu = std::max(kAirHu, ph.body_hu - g.severity);
      return true;
    }
  }

  *hu = ph.body_hu;
  if (sec.kind == SectionKind::kTTF && ph.insert_count > 0) {
    const double ring = ph.insert_ring_frac * sec.r0;
    const double rod2 = ph.insert_radius_mm * ph.insert_radius_mm;
    for (int j = 0; j < ph.insert_count; ++j) {
      const double a = 2.0 * std::numbers::pi * j / ph.insert_count;
      const double dx = lx - ring * std::cos(a), dy = ly - ring * std::sin(a);
      if (dx * dx + dy * dy <= rod2) {
        *hu = ph.insert_hu[static_cast<std::size_t>(j) % ph.insert_hu.size()];
        break;
      }
    }
  }
  return true;
}

// Gaussian field: iid normals, optionally box-blurred with an sd rescale so
// the marginal sd stays noise_sigma_hu while pixels gain correlation.
Tensor<double> draw_noise_field(const AcquisitionSpec& acq, RngState& rng) {
  const int A = acq.resolution_px;
  Tensor<double> field({A, A});
  for (std::int64_t i = 0; i < field.numel(); ++i) {
    field[i] = acq.noise_sigma_hu * rng.next_normal();
  }
  if (acq.noise_correlation_px > 0 && acq.noise_sigma_hu > 0.0) {
    const int r = acq.noise_correlation_px;
    const int width = 2 * r + 1;
    const auto reflect = [A](int i) {
      if (i < 0) i = -i - 1;
      if (i >= A) i = 2 * A - 1 - i;
      return i;
    };
    Tensor<double> blurred({A, A});
    for (int row = 0; row < A; ++row) {
      for (int col = 0; col < A; ++col) {
        double s = 0.0;
        for (int dr = -r; dr <= r; ++dr) {
          for (int dc = -r; dc <= r; ++dc) {
            s += field.at(reflect(row + dr), reflect(col + dc));
          }
        }
        // Mean over width^2 iid samples scales sd by 1/width; dividing the
        // sum by width alone restores the target sd.
        blurred.at(row, col) = s / width;
      }
    }
    field = std::move(blurred);
  }
  return field;
}

TensorI16 quantize(const Tensor<double>& mean_hu, const Tensor<double>& noise) {
  TensorI16 out(mean_hu.shape);
  for (std::int64_t i = 0; i < out.numel(); ++i) {
    const double v = round_half_away(mean_hu[i] + noise[i]);
    out[i] = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
  }
  return out;
}

// Slab extent mapped onto the phantom axis: with pose R the scanner z axis
// advances along the phantom axis at rate 1/R_zz, pivoting about the phantom
// midpoint.
struct AxisInterval {
  double a, b;
  double center;
};

AxisInterval axis_interval(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                           double z_center_mm) {
  const double L = phantom.length();
  const double rzz = std::cos(deg2rad(acq.tilt_x_deg)) * std::cos(deg2rad(acq.tilt_y_deg));
  const double pivot_z = acq.z_offset_mm + L / 2.0;
  const auto map = [&](double zw) { return (zw - pivot_z) / rzz + L / 2.0; };
  return {map(z_center_mm - acq.slice_thickness_mm / 2.0),
          map(z_center_mm + acq.slice_thickness_mm / 2.0), map(z_center_mm)};
}

// Label assuming the slice shows some phantom material (OoP already ruled out).
SliceLabel label_from_interval(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                               double z_center_mm, const std::vector<ResolvedGap>& gaps) {
  const double L = phantom.length();
  const AxisInterval iv = axis_interval(phantom, acq, z_center_mm);
  if (iv.b < 0.0 || iv.a > L) return SliceLabel::kAGP;  // oblique end sliver
  for (const ResolvedGap& g : gaps) {
    if (iv.b > g.z0 && iv.a < g.z1) return SliceLabel::kAGP;
  }
  for (double m : phantom.interfaces()) {
    if (iv.a < m && m < iv.b) return SliceLabel::kAGP;
  }
  // Dominant section by axial overlap; ties go to the earlier section.
  const double ca = std::max(iv.a, 0.0), cb = std::min(iv.b, L);
  double best = -1.0;
  SectionKind kind = SectionKind::kNPS;
  for (const Section& s : phantom.sections) {
    const double ov = std::min(cb, s.z1) - std::max(ca, s.z0);
    if (ov > best) {
      best = ov;
      kind = s.kind;
    }
  }
  return section_kind_label(kind);
}

}  // namespace

void AcquisitionSpec::validate() const {
  if (fov_mm <= 0.0 || resolution_px <= 0 || slice_thickness_mm <= 0.0) {
    throw ConfigError("acquisition: fov, resolution and slice thickness must be positive");
  }
  if (std::abs(tilt_x_deg) >= 90.0 || std::abs(tilt_y_deg) >= 90.0) {
    throw ConfigError("acquisition: |tilt| must be below 90 degrees");
  }
  if (sub_slabs < 1) throw ConfigError("acquisition: sub_slabs must be >= 1");
  if (noise_sigma_hu < 0.0 || noise_correlation_px < 0) {
    throw ConfigError("acquisition: noise parameters must be nonnegative");
  }
  if (z_margin_mm < 0.0) throw ConfigError("acquisition: z margin must be nonnegative");
}

ArtifactSpec default_artifacts() {
  ArtifactSpec art;
  for (int idx : {3, 7, 11}) art.air_gaps.push_back({idx, 2.0, 1000.0});
  return art;
}

RenderedSlice render_slice_mean(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                                double z_center_mm, const ArtifactSpec& artifacts) {
  acq.validate();
  const int A = acq.resolution_px;
  const double L = phantom.length();
  const Rotation rot = Rotation::from_acq(acq);
  // The phantom axis midpoint sits at this world point and tilts pivot on it.
  const std::array<double, 3> pivot = {acq.offset_x_mm, acq.offset_y_mm,
                                       acq.z_offset_mm + L / 2.0};
  const double px_mm = acq.fov_mm / A;
  const int nss = acq.sub_slabs;
  const std::vector<ResolvedGap> gaps = resolve_gaps(phantom, artifacts);
  const BedSpec& bed = phantom.support;
  const bool bed_on = acq.bed && bed.enabled;

  RenderedSlice out{Tensor<double>({A, A}), 0};
  for (int row = 0; row < A; ++row) {
    const double y = (row + 0.5) * px_mm - acq.fov_mm / 2.0;
    const bool bed_row = bed_on && y >= bed.y0_mm && y <= bed.y1_mm;
    for (int col = 0; col < A; ++col) {
      const double x = (col + 0.5) * px_mm - acq.fov_mm / 2.0;
      const bool bed_px = bed_row && std::abs(x - bed.x_offset_mm) <= bed.halfwidth_mm;
      double acc = 0.0;
      for (int k = 0; k < nss; ++k) {
        const double z = z_center_mm + acq.slice_thickness_mm * ((k + 0.5) / nss - 0.5);
        const std::array<double, 3> local =
            rot.apply_transposed({x - pivot[0], y - pivot[1], z - pivot[2]});
        double hu;
        if (sample_phantom(phantom, gaps, local[0], local[1], local[2] + L / 2.0, &hu)) {
          ++out.inside_samples;
        } else {
          hu = bed_px ? bed.hu : kAirHu;
        }
        acc += hu;
      }
      out.mean_hu.at(row, col) = acc / nss;
    }
  }
  return out;
}

TensorI16 rasterize_slice(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                          double z_center_mm, const ArtifactSpec& artifacts, RngState rng) {
  const RenderedSlice rendered = render_slice_mean(phantom, acq, z_center_mm, artifacts);
  const Tensor<double> noise = draw_noise_field(acq, rng);
  return quantize(rendered.mean_hu, noise);
}

SliceLabel label_slice(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                       double z_center_mm, const ArtifactSpec& artifacts) {
  if (render_slice_mean(phantom, acq, z_center_mm, artifacts).inside_samples == 0) {
    return SliceLabel::kOoP;
  }
  return label_from_interval(phantom, acq, z_center_mm, resolve_gaps(phantom, artifacts));
}

double transition_distance_mm(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                              double z_center_mm, const ArtifactSpec& artifacts) {
  const AxisInterval iv = axis_interval(phantom, acq, z_center_mm);
  double dist = std::numeric_limits<double>::infinity();
  for (double m : phantom.interfaces()) dist = std::min(dist, std::abs(iv.center - m));
  for (const ResolvedGap& g : resolve_gaps(phantom, artifacts)) {
    dist = std::min({dist, std::abs(iv.center - g.z0), std::abs(iv.center - g.z1)});
  }
  return dist;
}

std::vector<double> slice_grid(const PhantomSpec& phantom, const AcquisitionSpec& acq) {
  const double z0 = acq.z_offset_mm - acq.z_margin_mm;
  const double z1 = acq.z_offset_mm + phantom.length() + acq.z_margin_mm;
  const int n = static_cast<int>(std::floor((z1 - z0) / acq.slice_thickness_mm + 1e-9)) + 1;
  std::vector<double> zs(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) zs[static_cast<std::size_t>(k)] = z0 + k * acq.slice_thickness_mm;
  return zs;
}

LabeledSeries generate_series(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                              const ArtifactSpec& artifacts) {
  acq.validate();
  LabeledSeries series;
  series.phantom = phantom;
  series.acq = acq;
  series.artifacts = artifacts;
  const std::vector<ResolvedGap> gaps = resolve_gaps(phantom, artifacts);
  RngState rng(acq.seed);
  const std::vector<double> zs = slice_grid(phantom, acq);
  series.slices.reserve(zs.size());
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const double z = zs[k];
    const RenderedSlice rendered = render_slice_mean(phantom, acq, z, artifacts);

    LabeledSlice slice;
    slice.label = rendered.inside_samples == 0 ? SliceLabel::kOoP
                                               : label_from_interval(phantom, acq, z, gaps);
    // Per-slice noise substream: one slice's draws never shift another's.
    RngState noise_rng = rng.substream(static_cast<std::uint64_t>(k));
    slice.hu = quantize(rendered.mean_hu, draw_noise_field(acq, noise_rng));
    slice.z_center_mm = z;
    slice.transition_dist_mm = transition_distance_mm(phantom, acq, z, artifacts);
    series.slices.push_back(std::move(slice));
  }
  return series;
}

SeriesJitter extreme_jitter() {
  SeriesJitter j;
  // Offset dominates tilt by design: a large in-plane shift is the kind of
  // misplacement translation augmentation can cover, while steep tilt mixes
  // sections within one slab and caps every classifier's accuracy.
  j.tilt_min_deg = 3.0;
  j.tilt_max_deg = 6.0;
  j.offset_min_frac = 0.12;
  j.offset_max_frac = 0.18;
  j.noise_min_hu = 12.0;
  j.noise_max_hu = 20.0;
  j.noise_correlation_px = 1;
  j.gap_prob = 0.6;
  j.gap_min_mm = 2.5;
  j.gap_max_mm = 7.0;
  j.severity_min_hu = 900.0;
  j.severity_max_hu = 1100.0;
  j.bed_shift_max_mm = 10.0;
  return j;
}

LabeledSeries generate_jittered_series(const PhantomSpec& phantom,
                                       const AcquisitionSpec& base_acq,
                                       const SeriesJitter& jitter, std::uint64_t seed) {
  RngState rng(seed);
  RngState pose = rng.substream(1);
  RngState gaps = rng.substream(2);
  RngState misc = rng.substream(3);

  AcquisitionSpec acq = base_acq;
  const double sign_x = pose.next_bool(0.5) ? 1.0 : -1.0;
  const double sign_y = pose.next_bool(0.5) ? 1.0 : -1.0;
  acq.tilt_x_deg = sign_x * (jitter.tilt_min_deg +
                             (jitter.tilt_max_deg - jitter.tilt_min_deg) * pose.next_uniform());
  acq.tilt_y_deg = sign_y * (jitter.tilt_min_deg +
                             (jitter.tilt_max_deg - jitter.tilt_min_deg) * pose.next_uniform());
  const double mag =
      base_acq.fov_mm * (jitter.offset_min_frac +
                         (jitter.offset_max_frac - jitter.offset_min_frac) * pose.next_uniform());
  const double angle = 2.0 * std::numbers::pi * pose.next_uniform();
  acq.offset_x_mm = mag * std::cos(angle);
  acq.offset_y_mm = mag * std::sin(angle);
  acq.z_offset_mm = base_acq.z_offset_mm +
                    jitter.z_phase_jitter * acq.slice_thickness_mm * pose.next_uniform();

  PhantomSpec ph = phantom;
  if (jitter.bed_shift_max_mm > 0.0) {
    ph.support.x_offset_mm += jitter.bed_shift_max_mm * (2.0 * pose.next_uniform() - 1.0);
  }

  // Internal interfaces only (end faces cannot hold a gap). Every interface
  // consumes the same number of draws so one gap's coin flip never shifts the
  // geometry drawn for the next.
  ArtifactSpec art;
  const int n_ifaces = static_cast<int>(phantom.interfaces().size());
  for (int i = 1; i + 1 < n_ifaces; ++i) {
    const bool open = gaps.next_uniform() < jitter.gap_prob;
    const double extent =
        jitter.gap_min_mm + (jitter.gap_max_mm - jitter.gap_min_mm) * gaps.next_uniform();
    const double severity =
        jitter.severity_min_hu +
        (jitter.severity_max_hu - jitter.severity_min_hu) * gaps.next_uniform();
    if (open) art.air_gaps.push_back({i, extent, severity});
  }

  acq.noise_sigma_hu =
      jitter.noise_min_hu + (jitter.noise_max_hu - jitter.noise_min_hu) * misc.next_uniform();
  acq.noise_correlation_px = jitter.noise_correlation_px;
  acq.seed = rng.substream(4).seed();

  return generate_series(ph, acq, art);
}

LabeledSeries generate_extreme_series(const PhantomSpec& phantom,
                                      const AcquisitionSpec& base_acq, std::uint64_t seed) {
  return generate_jittered_series(phantom, base_acq, extreme_jitter(), seed);
}

SplitSet make_splits(const PhantomSpec& phantom, const AcquisitionSpec& base_acq,
                     std::uint64_t seed) {
  RngState rng(seed);
  const SeriesJitter standard;  // in-tolerance defaults
  SplitSet out;
  // Substream ids partition the seed space by split: adding series to one
  // split never shifts another split's content.
  for (int i = 0; i < 9; ++i) {
    out.train.push_back(
        generate_jittered_series(phantom, base_acq, standard, rng.substream(100 + i).seed()));
  }
  for (int i = 0; i < 3; ++i) {
    out.val.push_back(
        generate_jittered_series(phantom, base_acq, standard, rng.substream(200 + i).seed()));
  }
  for (int i = 0; i < 3; ++i) {
    out.test.push_back(
        generate_jittered_series(phantom, base_acq, standard, rng.substream(300 + i).seed()));
  }
  out.extreme.push_back(generate_extreme_series(phantom, base_acq, rng.substream(400).seed()));
  return out;
}

}  // namespace phantomqa
