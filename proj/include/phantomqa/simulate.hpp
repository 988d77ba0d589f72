#pragma once

#include <cstdint>
#include <vector>

#include "phantomqa/phantom.hpp"
#include "phantomqa/rng.hpp"
#include "phantomqa/tensor.hpp"

namespace phantomqa {

// Slice-series acquisition of a posed phantom. World coordinates: x right,
// y down, z along the scan axis. The phantom is tilted by Rx(tx)*Ry(ty)
// about its mid-length point, shifted in-plane by the lateral offsets and
// along the axis by z_offset; the bed stays fixed in world space. Slices
// are slabs of the configured thickness sampled on a regular z grid
// covering the phantom plus a margin on both ends.

struct AcquisitionSpec {
  double fov_mm = 400.0;
  int resolution_px = 512;
  double slice_thickness_mm = 5.0;
  double tilt_x_deg = 0.0;
  double tilt_y_deg = 0.0;
  double offset_x_mm = 0.0;
  double offset_y_mm = 0.0;
  double z_offset_mm = 0.0;          // axial shift of the phantom
  double z_margin_mm = 30.0;         // scan extends past both phantom ends
  int sub_slabs = 8;                 // through-plane samples averaged per slice
  double noise_sigma_hu = 10.0;
  int noise_correlation_px = 0;      // box-blur radius on the noise field; 0 = iid
  bool bed = true;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// An air gap opens at a section interface: material over the axial extent
// has its HU dropped by `severity_hu_drop` (floored at air). A drop that
// reaches air removes the material entirely (true gap); smaller drops model
// partial seating and keep membership.
struct AirGap {
  int interface_index = 0;  // into PhantomSpec::interfaces()
  double extent_mm = 2.0;
  double severity_hu_drop = 1000.0;
};

struct ArtifactSpec {
  std::vector<AirGap> air_gaps;
};

// Three gaps at piece junctions, fully open; the deterministic default.
ArtifactSpec default_artifacts();

struct LabeledSlice {
  TensorI16 hu;  // [resolution_px, resolution_px]
  SliceLabel label = SliceLabel::kOoP;
  double z_center_mm = 0.0;
  double transition_dist_mm = 0.0;  // axis distance to nearest interface/gap edge
};

struct LabeledSeries {
  std::vector<LabeledSlice> slices;
  PhantomSpec phantom;
  AcquisitionSpec acq;
  ArtifactSpec artifacts;
};

// Noise-free slab mean plus the number of (pixel, sub-slab) samples that
// hit phantom material. Air is -1000.
struct RenderedSlice {
  Tensor<double> mean_hu;
  std::int64_t inside_samples = 0;
};

RenderedSlice render_slice_mean(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                                double z_center_mm, const ArtifactSpec& artifacts);

// Full pipeline for one slice: slab mean, Gaussian HU noise (one normal per
// pixel, row-major; optional correlation blur), round half away to i16.
TensorI16 rasterize_slice(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                          double z_center_mm, const ArtifactSpec& artifacts, RngState rng);

// Geometric ground truth: OoP when the slab holds no phantom material;
// AGP when the slab's axis interval overlaps a gap or spans an interface
// (end faces included) or the slab clips an end face obliquely; otherwise
// the dominant section kind.
SliceLabel label_slice(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                       double z_center_mm, const ArtifactSpec& artifacts);

// Axis distance from the slab center to the nearest interface or gap edge.
double transition_distance_mm(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                              double z_center_mm, const ArtifactSpec& artifacts);

// Slice grid of the series defined by acq (z positions, ascending).
std::vector<double> slice_grid(const PhantomSpec& phantom, const AcquisitionSpec& acq);

LabeledSeries generate_series(const PhantomSpec& phantom, const AcquisitionSpec& acq,
                              const ArtifactSpec& artifacts);

// Sampling ranges for randomized series variety.
struct SeriesJitter {
  double tilt_max_deg = 2.0;          // per axis, symmetric
  double tilt_min_deg = 0.0;
  double offset_min_frac = 0.0;       // of fov, in-plane magnitude
  double offset_max_frac = 0.025;
  double z_phase_jitter = 1.0;        // fraction of slice thickness
  double noise_min_hu = 8.0;
  double noise_max_hu = 14.0;
  int noise_correlation_px = 0;
  double gap_prob = 0.35;             // per internal interface
  double gap_min_mm = 1.5;
  double gap_max_mm = 4.0;
  double severity_min_hu = 900.0;
  double severity_max_hu = 1100.0;
  double bed_shift_max_mm = 0.0;
};

// Deliberate-misalignment profile: oblique tilt, off-center placement far
// enough to cut the widest sections off the field of view, off-center bed,
// frequent gaps.
SeriesJitter extreme_jitter();

// Draw one series' acquisition/artifacts from the jitter ranges and render
// it. Degenerate ranges (all zero, gap_prob 0) reproduce generate_series.
LabeledSeries generate_jittered_series(const PhantomSpec& phantom,
                                       const AcquisitionSpec& base_acq,
                                       const SeriesJitter& jitter, std::uint64_t seed);

LabeledSeries generate_extreme_series(const PhantomSpec& phantom,
                                      const AcquisitionSpec& base_acq, std::uint64_t seed);

struct SplitSet {
  std::vector<LabeledSeries> train, val, test, extreme;
};

// Series-level splits: 9 train / 3 val / 3 test standard-jitter series plus
// 1 extreme series, all derived from one master seed.
SplitSet make_splits(const PhantomSpec& phantom, const AcquisitionSpec& base_acq,
                     std::uint64_t seed);

}  // namespace phantomqa
