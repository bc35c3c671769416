// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/geometry/region_edit.hpp"

#include "cranio/error.hpp"

#include <cmath>

namespace cranio {

int RegionLabels::region_index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

RegionEditor::RegionEditor(std::vector<Vec3> points, RegionLabels labels, double band_mm)
    : points_(std::move(points)), labels_(std::move(labels)), band_(band_mm) {
  if (labels_.vertex_region.size() != points_.size()) {
    throw ValidationError("region labels cover " + std::to_string(labels_.vertex_region.size()) +
                          " vertices, skull has " + std::to_string(points_.size()));
  }
  all_ = std::make_unique<PointIndex>(points_);
  per_region_.resize(labels_.names.size());
  std::vector<std::vector<Vec3>> grouped(labels_.names.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int r = labels_.vertex_region[i];
    if (r < 0 || r >= static_cast<int>(grouped.size())) {
      throw ValidationError("vertex " + std::to_string(i) + " has invalid region id");
    }
    grouped[r].push_back(points_[i]);
  }
  for (std::size_t r = 0; r < grouped.size(); ++r) {
    per_region_[r] = std::make_unique<PointIndex>(std::move(grouped[r]));
  }
}

void RegionEditor::set_transforms(const std::map<std::string, Affine34>& transforms) {
  active_.clear();
  for (const auto& [name, a] : transforms) {
    const int r = labels_.region_index(name);
    if (r < 0) throw ValidationError("unknown region label '" + name + "'");
    if (!a.allFinite()) throw ValidationError("transform for region '" + name + "' is not finite");
    active_.emplace_back(r, a);
  }
}

Vec3 RegionEditor::displacement(const Vec3& x, int own_region) const {
  Vec3 d = Vec3::Zero();
  for (const auto& [r, a] : active_) {
    double w = 0.0;
    if (r == own_region) {
      w = 1.0;
    } else if (band_ > 0.0 && per_region_[r]->size() > 0) {
      const double dist = std::sqrt(per_region_[r]->nearest(x).squared_distance);
      w = std::max(0.0, 1.0 - dist / band_);
    }
    if (w > 0.0) d += w * (apply_affine(a, x) - x);
  }
  return d;
}

Vec3 RegionEditor::displacement(const Vec3& x) const {
  if (active_.empty()) return Vec3::Zero();
  const int own = labels_.vertex_region[all_->nearest(x).index];
  return displacement(x, own);
}

std::vector<Vec3> RegionEditor::apply() const {
  std::vector<Vec3> out = points_;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += displacement(points_[i], labels_.vertex_region[i]);
  }
  return out;
}

}  // namespace cranio
