// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/types.hpp"

#include <optional>

namespace cranio {

/// Barycentric tolerance on triangle edges for ray tests.
inline constexpr double kRayEdgeTolerance = 1e-12;

struct TrianglePoint {
  Vec3 point;
  /// Weights of (a, b, c); they sum to one.
  Vec3 barycentric;
};

/// Closest point on triangle (a, b, c) to p, by Voronoi-region classification.
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct RayTriangleHit {
  double t;
  double u;  // weight of b
  double v;  // weight of c
};

/// Moller-Trumbore. Returns the parametric distance along `dir` for hits
/// with t > t_min; `dir` need not be normalized.
std::optional<RayTriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& dir,
                                                     const Vec3& a, const Vec3& b, const Vec3& c,
                                                     double t_min);

}  // namespace cranio
