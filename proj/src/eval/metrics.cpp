// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/eval/metrics.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/spatial_index.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace cranio {

namespace {

void require_points(std::span<const Vec3> p, const char* what) {
  if (p.empty()) throw ValidationError(std::string(what) + " point set is empty");
  for (const Vec3& x : p) {
    if (!x.allFinite()) throw ValidationError(std::string(what) + " point set has non-finite entries");
  }
}

Aabb bounds_of(std::span<const Vec3> p) {
  Aabb b;
  for (const Vec3& x : p) b.extend(x);
  return b;
}

double mean_nearest(std::span<const Vec3> from, std::span<const Vec3> to) {
  const PointIndex index(std::vector<Vec3>(to.begin(), to.end()));
  double sum = 0.0;
  for (const Vec3& x : from) sum += std::sqrt(index.nearest(x).squared_distance);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double principal_box_diagonal(std::span<const Vec3> points) {
  require_points(points, "box");
  Vec3 mean = Vec3::Zero();
  for (const Vec3& x : points) mean += x;
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& x : points) cov += (x - mean) * (x - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Mat3 axes = eig.eigenvectors();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& x : points) {
    const Vec3 local = axes.transpose() * (x - mean);
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  return (hi - lo).norm();
}

double nrmse(std::span<const Vec3> pred, const TriMesh& gt) {
  require_points(pred, "predicted");
  if (gt.faces.empty()) return nrmse(pred, std::span<const Vec3>(gt.vertices));
  const double diag = principal_box_diagonal(gt.vertices);
  if (!(diag > 0.0)) throw ValidationError("ground truth has a degenerate bounding box");
  const SpatialIndex index(gt);
  double sq = 0.0;
  for (const Vec3& x : pred) sq += (index.closest_point(x).point - x).squaredNorm();
  return 100.0 * std::sqrt(sq / static_cast<double>(pred.size())) / diag;
}

double nrmse(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  require_points(pred, "predicted");
  require_points(gt, "ground-truth");
  const double diag = principal_box_diagonal(gt);
  if (!(diag > 0.0)) throw ValidationError("ground truth has a degenerate bounding box");
  const PointIndex index(std::vector<Vec3>(gt.begin(), gt.end()));
  double sq = 0.0;
  for (const Vec3& x : pred) sq += index.nearest(x).squared_distance;
  return 100.0 * std::sqrt(sq / static_cast<double>(pred.size())) / diag;
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_points(a, "first");
  require_points(b, "second");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

std::vector<Vec3> crop_to(std::span<const Vec3> gt, std::span<const Vec3> pred, double margin) {
  if (!(margin >= 0.0)) throw ValidationError("crop margin must be non-negative");
  require_points(pred, "predicted");
  const Aabb box = bounds_of(pred).dilated(margin);
  std::vector<Vec3> out;
  for (const Vec3& g : gt) {
    if (box.contains(g)) out.push_back(g);
  }
  return out;
}

double recall(std::span<const Vec3> gt, std::span<const Vec3> pred, double tau) {
  if (!(tau > 0.0)) throw ValidationError("recall threshold must be positive");
  require_points(gt, "ground-truth");
  require_points(pred, "predicted");
  const PointIndex index(std::vector<Vec3>(pred.begin(), pred.end()));
  const double tau2 = tau * tau;
  std::size_t hit = 0;
  for (const Vec3& g : gt) {
    if (index.nearest(g).squared_distance <= tau2) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(gt.size());
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"nrmse", r.nrmse},
       {"chamfer_mm", r.chamfer},
       {"recall", r.recall},
       {"recall_tau_mm", r.tau},
       {"pred_points", r.pred_points},
       {"gt_points", r.gt_points},
       {"gt_points_cropped", r.gt_points_cropped},
       {"crop", {{"margin_mm", r.crop_margin},
                 {"min", {r.crop.min.x(), r.crop.min.y(), r.crop.min.z()}},
                 {"max", {r.crop.max.x(), r.crop.max.y(), r.crop.max.z()}}}}};
}

MetricsReport evaluate(const TriMesh& pred, const TriMesh& gt, double tau, double crop_margin) {
  MetricsReport r;
  r.tau = tau;
  r.crop_margin = crop_margin;
  r.pred_points = pred.vertices.size();
  r.gt_points = gt.vertices.size();
  r.nrmse = nrmse(pred.vertices, gt);
  const std::vector<Vec3> cropped = crop_to(gt.vertices, pred.vertices, crop_margin);
  if (cropped.empty()) throw ValidationError("ground truth has no points inside the prediction region");
  r.gt_points_cropped = cropped.size();
  r.crop = bounds_of(pred.vertices).dilated(crop_margin);
  r.chamfer = chamfer(pred.vertices, cropped);
  r.recall = recall(gt.vertices, pred.vertices, tau);
  return r;
}

}  // namespace cranio
