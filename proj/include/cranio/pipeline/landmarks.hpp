// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cranio {

struct Landmark {
  std::string name;
  /// Vertex index on the template topology.
  int vertex = -1;
  /// Position on a particular instance (mm).
  Vec3 position = Vec3::Zero();
};

/// Named anatomical landmarks: template vertex indices plus instance positions.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(std::vector<Landmark> items) : items_(std::move(items)) {}

  const std::vector<Landmark>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  const Landmark* find(const std::string& name) const {
    for (const Landmark& l : items_) {
      if (l.name == name) return &l;
    }
    return nullptr;
  }
  /// Throws ValidationError when the landmark is absent.
  const Landmark& at(const std::string& name) const;

  void add(Landmark l) { items_.push_back(std::move(l)); }

  /// Unique names; every vertex index (when set) is < vertex_count.
  void validate(std::size_t vertex_count) const;

  /// Copy with positions read from a template-topology mesh.
  LandmarkSet on_mesh(const TriMesh& mesh) const;

  /// Copy with positions taken from a name -> position map; landmarks missing
  /// from the map are dropped.
  LandmarkSet with_positions(const std::map<std::string, Vec3>& positions) const;

  std::map<std::string, Vec3> positions() const;

 private:
  std::vector<Landmark> items_;
};

/// landmarks.json: {"name": [x, y, z], ...} in millimeters.
std::map<std::string, Vec3> load_landmark_positions(const std::filesystem::path& path);
void save_landmark_positions(const std::map<std::string, Vec3>& positions,
                             const std::filesystem::path& path);

}  // namespace cranio
