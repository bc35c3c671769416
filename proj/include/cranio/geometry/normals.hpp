// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <vector>

namespace cranio {

/// Area-weighted vertex normals, normalized. Vertices whose star has zero
/// area (or no faces at all) get +Z.
std::vector<Vec3> vertex_normals(const TriMesh& mesh);

/// Unnormalized face normal; its length is twice the triangle area.
inline Vec3 face_area_normal(const TriMesh& mesh, const Face& f) {
  const Vec3& a = mesh.vertices[f[0]];
  return (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
}

}  // namespace cranio
