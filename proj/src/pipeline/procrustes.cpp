// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/pipeline/procrustes.hpp"

#include "cranio/error.hpp"

#include <Eigen/SVD>

namespace cranio {

std::vector<Vec3> Similarity::apply(std::span<const Vec3> points) const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(apply(p));
  return out;
}

TriMesh Similarity::apply(const TriMesh& mesh) const {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = apply(v);
  return out;
}

Similarity fit_similarity(std::span<const Vec3> source, std::span<const Vec3> target,
                          bool allow_scale) {
  if (source.size() != target.size()) throw ValidationError("point sets differ in length");
  const std::size_t n = source.size();
  if (n < 3) throw ValidationError("similarity fit needs at least three point pairs");
  const auto src = as_matrix(source);
  const auto dst = as_matrix(target);
  const Eigen::RowVector3d mu_s = src.colwise().mean();
  const Eigen::RowVector3d mu_d = dst.colwise().mean();
  const PointMatrix xs = src.rowwise() - mu_s;
  const PointMatrix xd = dst.rowwise() - mu_d;

  const Eigen::JacobiSVD<Mat3> shape_svd(xs.transpose() * xs);
  const Eigen::Vector3d sv = shape_svd.singularValues();
  if (sv(0) <= 0.0 || sv(1) <= 1e-12 * sv(0)) {
    throw ValidationError("degenerate (collinear) point configuration");
  }

  const Mat3 cov = xd.transpose() * xs / static_cast<double>(n);
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) d(2, 2) = -1.0;

  Similarity s;
  s.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  if (allow_scale) {
    const double var_s = xs.squaredNorm() / static_cast<double>(n);
    s.scale = (svd.singularValues().asDiagonal() * d).trace() / var_s;
  }
  s.translation = mu_d.transpose() - s.scale * s.rotation * mu_s.transpose();
  return s;
}

}  // namespace cranio
