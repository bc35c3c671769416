// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/region_edit.hpp"
#include "cranio/pipeline/landmarks.hpp"

#include <filesystem>
#include <vector>

namespace cranio {

/// The fixed face/skull template pair every case is registered to.
struct TemplateSet {
  TriMesh face;
  TriMesh skull;
  LandmarkSet face_landmarks;
  LandmarkSet skull_landmarks;
  /// Bilateral mirror partner of every vertex.
  std::vector<int> face_symmetry;
  std::vector<int> skull_symmetry;
  RegionLabels skull_regions;

  /// Throws ValidationError when sizes or indices are inconsistent.
  void validate() const;
};

/// Directory layout: face.ply, skull.ply, face_landmarks.json,
/// skull_landmarks.json (name -> vertex), skull_regions.json, symmetry.json.
void save_template_set(const TemplateSet& t, const std::filesystem::path& dir);
TemplateSet load_template_set(const std::filesystem::path& dir);

}  // namespace cranio
