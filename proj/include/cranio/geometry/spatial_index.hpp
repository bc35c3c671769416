// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <optional>
#include <vector>

namespace cranio {

struct ClosestPoint {
  Vec3 point;
  double squared_distance;
  int face;
  Vec3 barycentric;
};

struct RayHit {
  /// Parameter along the (normalized) ray direction.
  double t;
  int face;
  Vec3 point;
  Vec3 barycentric;
};

/// Bounding volume hierarchy over the triangles of one mesh. Immutable after
/// construction; concurrent queries are safe.
///
/// Ties are resolved toward the lowest face index so results match a plain
/// scan over all triangles in face order.
class SpatialIndex {
 public:
  explicit SpatialIndex(TriMesh mesh);

  const TriMesh& mesh() const { return mesh_; }

  /// Throws ValidationError on an empty mesh.
  ClosestPoint closest_point(const Vec3& query) const;

  /// First hit with t > t_min along origin + t * dir. `dir` must be unit length.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir, double t_min) const;

 private:
  struct Node {
    Aabb box;
    int left = -1;  // child indices; -1 marks a leaf
    int right = -1;
    int begin = 0;  // leaf range into order_
    int end = 0;
  };

  int build(int begin, int end, std::vector<Vec3>& centroids, int depth);

  TriMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Aabb> face_boxes_;
};

/// Reference implementations that scan every triangle. Used as oracles and
/// for tiny meshes.
ClosestPoint closest_point_brute_force(const TriMesh& mesh, const Vec3& query);
std::optional<RayHit> intersect_brute_force(const TriMesh& mesh, const Vec3& origin,
                                            const Vec3& dir, double t_min);

/// Nearest-neighbour queries over a point set (kd-tree). Ties resolve to the
/// lowest point index.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  struct Nearest {
    int index;
    double squared_distance;
  };
  /// Throws ValidationError when the set is empty.
  Nearest nearest(const Vec3& query) const;

 private:
  struct Node {
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
  };
  int build(int begin, int end);
  void search(int node, const Vec3& q, Nearest& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace cranio
