// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <nlohmann/json.hpp>

#include <span>

namespace cranio {

inline constexpr double kDefaultRecallTau = 2.0;   // mm
inline constexpr double kDefaultCropMargin = 5.0;  // mm

/// Bounding-box diagonal in the principal-axis frame of `points`, so the
/// value does not change when the points are rotated.
double principal_box_diagonal(std::span<const Vec3> points);

/// RMSE of closest-point distances from `pred` to `gt`, divided by
/// principal_box_diagonal(gt), times 100. The mesh overload measures to the
/// surface, the point overload to the nearest gt point.
double nrmse(std::span<const Vec3> pred, const TriMesh& gt);
double nrmse(std::span<const Vec3> pred, std::span<const Vec3> gt);

/// Mean of the two directed mean nearest-neighbour distances (mm).
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Points of `gt` inside the bounding box of `pred` dilated by `margin`.
std::vector<Vec3> crop_to(std::span<const Vec3> gt, std::span<const Vec3> pred,
                          double margin = kDefaultCropMargin);

/// Fraction of `gt` points with a `pred` point within `tau` (inclusive).
double recall(std::span<const Vec3> gt, std::span<const Vec3> pred, double tau = kDefaultRecallTau);

struct MetricsReport {
  double nrmse = 0.0;
  double chamfer = 0.0;  // mm, against the cropped gt
  double recall = 0.0;
  double tau = kDefaultRecallTau;
  std::size_t pred_points = 0;
  std::size_t gt_points = 0;
  std::size_t gt_points_cropped = 0;
  double crop_margin = kDefaultCropMargin;
  Aabb crop;
};

void to_json(nlohmann::json& j, const MetricsReport& r);

/// All three metrics for a predicted mesh against a ground-truth mesh.
/// Recall counts gt vertices against predicted vertices.
MetricsReport evaluate(const TriMesh& pred, const TriMesh& gt, double tau = kDefaultRecallTau,
                       double crop_margin = kDefaultCropMargin);

}  // namespace cranio
