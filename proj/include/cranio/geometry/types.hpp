// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace cranio {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// Row-major N x 3 view, used to run Eigen kernels over a std::vector<Vec3>.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using PointMap = Eigen::Map<PointMatrix>;
using ConstPointMap = Eigen::Map<const PointMatrix>;

inline PointMap as_matrix(std::vector<Vec3>& points) {
  return PointMap(points.empty() ? nullptr : points.front().data(),
                  static_cast<Eigen::Index>(points.size()), 3);
}

inline ConstPointMap as_matrix(std::span<const Vec3> points) {
  return ConstPointMap(points.empty() ? nullptr : points.front().data(),
                       static_cast<Eigen::Index>(points.size()), 3);
}

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& other) {
    min = min.cwiseMin(other.min);
    max = max.cwiseMax(other.max);
  }
  bool empty() const { return (min.array() > max.array()).any(); }
  double diagonal() const { return empty() ? 0.0 : (max - min).norm(); }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Aabb dilated(double margin) const {
    Aabb out = *this;
    out.min.array() -= margin;
    out.max.array() += margin;
    return out;
  }
  /// Squared distance from a point to the box (zero inside).
  double squared_distance(const Vec3& p) const {
    const Vec3 d = (min - p).cwiseMax(p - max).cwiseMax(Vec3::Zero());
    return d.squaredNorm();
  }
};

Aabb bounding_box(std::span<const Vec3> points);

/// Intrinsic X-Y-Z rotation (radians): R = Rx(a) * Ry(b) * Rz(c).
inline Mat3 rotation_xyz(const Vec3& angles) {
  return (Eigen::AngleAxisd(angles.x(), Vec3::UnitX()) *
          Eigen::AngleAxisd(angles.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(angles.z(), Vec3::UnitZ()))
      .toRotationMatrix();
}

/// Inverse of rotation_xyz; the middle angle lies in [-pi/2, pi/2].
inline Vec3 angles_xyz(const Mat3& r) {
  const double b = std::atan2(r(0, 2), std::hypot(r(0, 0), r(0, 1)));
  const double a = std::atan2(-r(1, 2), r(2, 2));
  const double c = std::atan2(-r(0, 1), r(0, 0));
  return Vec3(a, b, c);
}

}  // namespace cranio
