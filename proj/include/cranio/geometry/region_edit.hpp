// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/spatial_index.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace cranio {

/// Row-major 3x4 affine transform [R | t].
using Affine34 = Eigen::Matrix<double, 3, 4>;

inline Affine34 identity_affine() {
  Affine34 a = Affine34::Zero();
  a.leftCols<3>().setIdentity();
  return a;
}

inline Vec3 apply_affine(const Affine34& a, const Vec3& p) {
  return a.leftCols<3>() * p + a.col(3);
}

/// Per-vertex region labels over a fixed skull topology.
struct RegionLabels {
  std::vector<std::string> names;
  /// One entry per vertex, index into `names`.
  std::vector<int> vertex_region;

  int region_index(const std::string& name) const;
};

/// Applies per-region transforms to a labelled point set. Labelled points
/// follow their region's transform fully; the transform fades linearly to
/// zero over `band_mm` outside the region (distance to the nearest labelled
/// point). Displacements from several regions add.
class RegionEditor {
 public:
  RegionEditor(std::vector<Vec3> points, RegionLabels labels, double band_mm);

  /// Throws ValidationError on an unknown label or non-finite entries.
  void set_transforms(const std::map<std::string, Affine34>& transforms);

  /// Displacement of an arbitrary point; its own region is that of the nearest
  /// labelled point.
  Vec3 displacement(const Vec3& x) const;

  /// Edited copy of the labelled points.
  std::vector<Vec3> apply() const;

  const RegionLabels& labels() const { return labels_; }

 private:
  Vec3 displacement(const Vec3& x, int own_region) const;

  std::vector<Vec3> points_;
  RegionLabels labels_;
  double band_;
  std::unique_ptr<PointIndex> all_;
  std::vector<std::unique_ptr<PointIndex>> per_region_;
  std::vector<std::pair<int, Affine34>> active_;
};

}  // namespace cranio
