// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <span>

namespace cranio {

/// x -> scale * rotation * x + translation.
struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
  std::vector<Vec3> apply(std::span<const Vec3> points) const;
  TriMesh apply(const TriMesh& mesh) const;
};

/// Least-squares similarity (or rigid, with allow_scale = false) taking
/// `source` onto `target` (Umeyama). Throws ValidationError for fewer than
/// three pairs or a collinear configuration.
Similarity fit_similarity(std::span<const Vec3> source, std::span<const Vec3> target,
                          bool allow_scale = true);

}  // namespace cranio
