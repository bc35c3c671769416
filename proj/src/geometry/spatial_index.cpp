// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/geometry/spatial_index.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cranio {

namespace {

constexpr int kLeafSize = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

bool better(double d, int face, double best_d, int best_face) {
  return d < best_d || (d == best_d && face < best_face);
}

// Slab test. Returns the entry parameter, or +inf when the box is missed or
// lies entirely behind t_min.
double ray_box_entry(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, const Vec3& dir,
                     double t_min, double t_max) {
  double lo = t_min;
  double hi = t_max;
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) {
      if (origin[k] < box.min[k] || origin[k] > box.max[k]) return kInf;
      continue;
    }
    double t0 = (box.min[k] - origin[k]) * inv_dir[k];
    double t1 = (box.max[k] - origin[k]) * inv_dir[k];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return kInf;
  }
  return lo;
}

}  // namespace

SpatialIndex::SpatialIndex(TriMesh mesh) : mesh_(std::move(mesh)) {
  mesh_.validate();
  const int n = static_cast<int>(mesh_.faces.size());
  if (n == 0) return;
  // Pad leaf boxes so edge-tolerant ray hits are never culled by rounding.
  const double pad = 1e-9 * std::max(mesh_.bbox_diagonal(), 1e-300);
  face_boxes_.resize(n);
  std::vector<Vec3> centroids(n);
  for (int f = 0; f < n; ++f) {
    Aabb box;
    for (int idx : mesh_.faces[f]) box.extend(mesh_.vertices[idx]);
    face_boxes_[f] = box.dilated(pad);
    centroids[f] = box.center();
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * n / kLeafSize + 1);
  build(0, n, centroids, 0);
}

int SpatialIndex::build(int begin, int end, std::vector<Vec3>& centroids, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroid_box;
  for (int i = begin; i < end; ++i) {
    box.extend(face_boxes_[order_[i]]);
    centroid_box.extend(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  if (end - begin <= kLeafSize || depth > 60) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  int axis = 0;
  const Vec3 extent = centroid_box.max - centroid_box.min;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids[a][axis];
                     const double cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid, centroids, depth + 1);
  const int right = build(mid, end, centroids, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestPoint SpatialIndex::closest_point(const Vec3& query) const {
  if (nodes_.empty()) throw ValidationError("closest_point on an empty mesh");
  ClosestPoint best{Vec3::Zero(), kInf, std::numeric_limits<int>::max(), Vec3::Zero()};
  struct Entry {
    int node;
    double d2;
  };
  Entry stack[128];
  int top = 0;
  stack[top++] = {0, nodes_[0].box.squared_distance(query)};
  while (top > 0) {
    const Entry e = stack[--top];
    if (e.d2 > best.squared_distance) continue;
    const Node& node = nodes_[e.node];
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = order_[i];
        const Face& tri = mesh_.faces[f];
        const TrianglePoint tp = closest_point_on_triangle(
            query, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        const double d2 = (tp.point - query).squaredNorm();
        if (better(d2, f, best.squared_distance, best.face)) {
          best = {tp.point, d2, f, tp.barycentric};
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squared_distance(query);
    const double dr = nodes_[node.right].box.squared_distance(query);
    // Push the farther child first so the nearer one is processed next.
    if (dl <= dr) {
      stack[top++] = {node.right, dr};
      stack[top++] = {node.left, dl};
    } else {
      stack[top++] = {node.left, dl};
      stack[top++] = {node.right, dr};
    }
  }
  return best;
}

std::optional<RayHit> SpatialIndex::intersect(const Vec3& origin, const Vec3& dir,
                                              double t_min) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = dir.cwiseInverse();
  double best_t = kInf;
  int best_face = std::numeric_limits<int>::max();
  RayTriangleHit best_hit{};
  struct Entry {
    int node;
    double t;
  };
  Entry stack[128];
  int top = 0;
  const double t_root = ray_box_entry(nodes_[0].box, origin, inv_dir, dir, t_min, kInf);
  if (t_root == kInf) return std::nullopt;
  stack[top++] = {0, t_root};
  while (top > 0) {
    const Entry e = stack[--top];
    if (e.t > best_t) continue;
    const Node& node = nodes_[e.node];
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = order_[i];
        const Face& tri = mesh_.faces[f];
        const auto hit = intersect_ray_triangle(origin, dir, mesh_.vertices[tri[0]],
                                                mesh_.vertices[tri[1]], mesh_.vertices[tri[2]],
                                                t_min);
        if (hit && better(hit->t, f, best_t, best_face)) {
          best_t = hit->t;
          best_face = f;
          best_hit = *hit;
        }
      }
      continue;
    }
    const double tl = ray_box_entry(nodes_[node.left].box, origin, inv_dir, dir, t_min, best_t);
    const double tr = ray_box_entry(nodes_[node.right].box, origin, inv_dir, dir, t_min, best_t);
    if (tl <= tr) {
      if (tr != kInf) stack[top++] = {node.right, tr};
      if (tl != kInf) stack[top++] = {node.left, tl};
    } else {
      if (tl != kInf) stack[top++] = {node.left, tl};
      if (tr != kInf) stack[top++] = {node.right, tr};
    }
  }
  if (best_face == std::numeric_limits<int>::max()) return std::nullopt;
  return RayHit{best_t, best_face, origin + best_t * dir,
                Vec3(1.0 - best_hit.u - best_hit.v, best_hit.u, best_hit.v)};
}

ClosestPoint closest_point_brute_force(const TriMesh& mesh, const Vec3& query) {
  if (mesh.faces.empty()) throw ValidationError("closest_point on an empty mesh");
  ClosestPoint best{Vec3::Zero(), kInf, std::numeric_limits<int>::max(), Vec3::Zero()};
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const Face& tri = mesh.faces[f];
    const TrianglePoint tp = closest_point_on_triangle(query, mesh.vertices[tri[0]],
                                                       mesh.vertices[tri[1]],
                                                       mesh.vertices[tri[2]]);
    const double d2 = (tp.point - query).squaredNorm();
    if (better(d2, f, best.squared_distance, best.face)) best = {tp.point, d2, f, tp.barycentric};
  }
  return best;
}

std::optional<RayHit> intersect_brute_force(const TriMesh& mesh, const Vec3& origin,
                                            const Vec3& dir, double t_min) {
  std::optional<RayHit> best;
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const Face& tri = mesh.faces[f];
    const auto hit = intersect_ray_triangle(origin, dir, mesh.vertices[tri[0]],
                                            mesh.vertices[tri[1]], mesh.vertices[tri[2]], t_min);
    if (hit && (!best || hit->t < best->t)) {
      best = RayHit{hit->t, f, origin + hit->t * dir, Vec3(1.0 - hit->u - hit->v, hit->u, hit->v)};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

PointIndex::PointIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(points_.size() / 4 + 1);
    build(0, static_cast<int>(points_.size()));
  }
}

int PointIndex::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= 8) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Aabb box;
  for (int i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  const Vec3 extent = box.max - box.min;
  int axis = 0;
  if (extent[1] > extent[axis]) axis = 1;
  if (extent[2] > extent[axis]) axis = 2;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void PointIndex::search(int node_id, const Vec3& q, Nearest& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_[idx] - q).squaredNorm();
      if (better(d2, idx, best.squared_distance, best.index)) best = {idx, d2};
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

PointIndex::Nearest PointIndex::nearest(const Vec3& query) const {
  if (points_.empty()) throw ValidationError("nearest-neighbour query on an empty point set");
  Nearest best{std::numeric_limits<int>::max(), kInf};
  search(0, query, best);
  return best;
}

}  // namespace cranio
