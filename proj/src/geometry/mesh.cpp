// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/geometry/mesh.hpp"

#include "cranio/error.hpp"

#include <algorithm>
#include <string>

namespace cranio {

Aabb bounding_box(std::span<const Vec3> points) {
  Aabb box;
  for (const Vec3& p : points) box.extend(p);
  return box;
}

void TriMesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (!vertices[i].allFinite()) {
      throw ValidationError("vertex " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& tri = faces[f];
    for (int idx : tri) {
      if (idx < 0 || idx >= n) {
        throw ValidationError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(idx) + " but mesh has " + std::to_string(n) +
                              " vertices");
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw ValidationError("face " + std::to_string(f) + " is degenerate (repeated index)");
    }
  }
  if (albedo && albedo->size() != vertices.size()) {
    throw ValidationError("albedo has " + std::to_string(albedo->size()) + " entries, expected " +
                          std::to_string(vertices.size()));
  }
}

Vec3 TriMesh::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const Vec3& v : vertices) c += v;
  return vertices.empty() ? c : Vec3(c / static_cast<double>(vertices.size()));
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      adj[f[k]].push_back(f[(k + 1) % 3]);
      adj[f[k]].push_back(f[(k + 2) % 3]);
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return adj;
}

TriMesh extract_faces(const TriMesh& mesh, const std::vector<bool>& keep_face,
                      std::vector<int>* old_to_new) {
  std::vector<int> remap(mesh.vertices.size(), -1);
  TriMesh out;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!keep_face[f]) continue;
    for (int idx : mesh.faces[f]) remap[idx] = 0;
  }
  int next = 0;
  for (std::size_t v = 0; v < remap.size(); ++v) {
    if (remap[v] < 0) continue;
    remap[v] = next++;
    out.vertices.push_back(mesh.vertices[v]);
  }
  if (mesh.albedo) {
    out.albedo.emplace();
    for (std::size_t v = 0; v < remap.size(); ++v) {
      if (remap[v] >= 0) out.albedo->push_back((*mesh.albedo)[v]);
    }
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    if (!keep_face[f]) continue;
    const Face& t = mesh.faces[f];
    out.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  }
  if (old_to_new) *old_to_new = std::move(remap);
  return out;
}

TriMesh transformed(const TriMesh& mesh, const Mat3& rotation, const Vec3& translation) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = rotation * v + translation;
  return out;
}

}  // namespace cranio
