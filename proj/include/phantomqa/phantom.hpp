#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "phantomqa/labels.hpp"

namespace phantomqa {

// Geometric model of a multi-diameter QA phantom: a solid of revolution
// whose axial profile alternates constant-diameter measurement sections
// (a multi-insert section and a uniform section per diameter) joined by
// conical tapers. All lengths are millimeters; the phantom's local axis
// is z' in [0, length], with cross-sections centered on the axis.

enum class SectionKind { kTTF = 0, kNPS = 1, kTaper = 2 };

struct Section {
  SectionKind kind;
  double z0, z1;  // axial extent
  double r0, r1;  // radius at z0 and z1; equal unless taper
  double radius_at(double z) const {
    if (z1 <= z0) return r0;
    const double t = (z - z0) / (z1 - z0);
    return r0 + (r1 - r0) * t;
  }
};

// Patient-bed slab, fixed in world coordinates (it does not follow the
// phantom pose). y grows downward in image space, so the bed sits at
// large y; x_offset_mm shifts it sideways for off-center setups.
struct BedSpec {
  bool enabled = true;
  double y0_mm = 182.0;
  double y1_mm = 196.0;
  double halfwidth_mm = 150.0;
  double x_offset_mm = 0.0;
  double hu = -400.0;
};

struct PhantomSpec {
  std::vector<Section> sections;
  double body_hu = -35.0;
  std::array<double, 4> insert_hu = {-700.0, -150.0, 250.0, 850.0};
  int insert_count = 4;           // rods per multi-insert section, evenly spaced
  double insert_radius_mm = 10.0;
  double insert_ring_frac = 0.5;  // rod center radius as a fraction of section radius
  BedSpec support;

  double length() const { return sections.empty() ? 0.0 : sections.back().z1; }

  // Index of the section containing z, or -1 outside [0, length].
  int section_at(double z) const {
    if (sections.empty() || z < 0.0 || z > length()) return -1;
    for (std::size_t i = 0; i < sections.size(); ++i) {
      if (z <= sections[i].z1) return static_cast<int>(i);
    }
    return static_cast<int>(sections.size()) - 1;
  }

  // Section boundaries including both end faces, ascending.
  std::vector<double> interfaces() const {
    std::vector<double> v;
    v.reserve(sections.size() + 1);
    if (sections.empty()) return v;
    v.push_back(sections.front().z0);
    for (const Section& s : sections) v.push_back(s.z1);
    return v;
  }
};

// Default five-diameter build: per diameter a 45 mm multi-insert section and
// a 55 mm uniform section, 20 mm tapers between diameters, 580 mm total.
inline PhantomSpec multi_diameter_default() {
  const std::array<double, 5> diam = {160.0, 210.0, 260.0, 310.0, 360.0};
  const double ttf_len = 45.0, nps_len = 55.0, taper_len = 20.0;
  PhantomSpec spec;
  double z = 0.0;
  for (std::size_t i = 0; i < diam.size(); ++i) {
    const double r = diam[i] / 2.0;
    spec.sections.push_back({SectionKind::kTTF, z, z + ttf_len, r, r});
    z += ttf_len;
    spec.sections.push_back({SectionKind::kNPS, z, z + nps_len, r, r});
    z += nps_len;
    if (i + 1 < diam.size()) {
      const double rn = diam[i + 1] / 2.0;
      spec.sections.push_back({SectionKind::kTaper, z, z + taper_len, r, rn});
      z += taper_len;
    }
  }
  return spec;
}

inline SliceLabel section_kind_label(SectionKind k) {
  switch (k) {
    case SectionKind::kTTF:
      return SliceLabel::kTTF;
    case SectionKind::kNPS:
      return SliceLabel::kNPS;
    case SectionKind::kTaper:
      return SliceLabel::kTaS;
  }
  throw std::logic_error("unreachable");
}

}  // namespace phantomqa
