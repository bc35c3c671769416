// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/types.hpp"

#include <optional>
#include <vector>

namespace cranio {

/// Indexed triangle mesh. Coordinates are millimeters. Meshes may be open
/// and may contain holes; nothing here assumes watertightness.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  /// Optional per-vertex RGB in [0, 1].
  std::optional<std::vector<Vec3>> albedo;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool empty() const { return vertices.empty() || faces.empty(); }

  /// Throws ValidationError naming the first offending face or array.
  void validate() const;

  Aabb bounds() const { return bounding_box(vertices); }
  double bbox_diagonal() const { return bounds().diagonal(); }
  Vec3 centroid() const;

  /// Same face list, element for element.
  bool same_topology(const TriMesh& other) const {
    return vertices.size() == other.vertices.size() && faces == other.faces;
  }
};

/// Vertex-vertex adjacency (sorted, unique) derived from the face list.
std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh);

/// Keeps only the listed faces and drops vertices no longer referenced.
/// `old_to_new` (optional) receives the vertex remap, -1 for dropped vertices.
TriMesh extract_faces(const TriMesh& mesh, const std::vector<bool>& keep_face,
                      std::vector<int>* old_to_new = nullptr);

/// Applies x -> R x + t to every vertex.
TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation);

}  // namespace cranio
