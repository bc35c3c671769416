// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/spatial_index.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace cranio {

/// Self-intersection guard as a fraction of the target's bounding-box diagonal.
inline constexpr double kSelfHitFraction = 1e-6;

/// Rays from origins toward targets. Targets only fix the direction; the ray
/// continues past them.
struct RayBundle {
  std::vector<Vec3> origins;
  std::vector<Vec3> targets;

  std::size_t size() const { return origins.size(); }
  /// Throws ValidationError on length mismatch or a zero-length ray.
  void validate() const;
  Vec3 direction(std::size_t i) const { return (targets[i] - origins[i]).normalized(); }
};

/// Intersections of a bundle with a mesh. Invalid entries store the sentinel
/// and must be read through the mask.
struct HitSet {
  static Vec3 sentinel() { return Vec3::Constant(std::numeric_limits<double>::quiet_NaN()); }
  /// Written in place of NaN in files.
  static constexpr double kFileSentinel = 1e30;

  std::vector<Vec3> points;   // hit point C
  std::vector<Vec3> vectors;  // origin - C
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return mask.size(); }
  bool valid(std::size_t i) const { return mask[i] != 0; }
  std::size_t valid_count() const;

  /// Mask-gated accessors; throw ValidationError on an invalid entry.
  const Vec3& point(std::size_t i) const;
  const Vec3& vector(std::size_t i) const;

  void resize_invalid(std::size_t n);
  void set(std::size_t i, const Vec3& origin, const Vec3& hit);
};

/// First intersection of every ray with t > kSelfHitFraction * diagonal.
HitSet psi_hit(const RayBundle& rays, const SpatialIndex& index);
/// Same contract by scanning every triangle; the reference for psi_hit.
HitSet psi_hit_brute_force(const RayBundle& rays, const TriMesh& mesh);

struct NormalMatchOptions {
  /// Hits farther than this fraction of the source diagonal are discarded.
  double max_distance_fraction = 0.05;
  /// Minimum cosine between the source normal and the hit face normal.
  double min_normal_cosine = 0.5;
};

/// Dense correspondences from casting each source vertex's +n and -n rays.
struct NormalMatch {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  /// 1 where the ray cast failed and the closest point was used instead.
  std::vector<std::uint8_t> fallback;

  std::size_t fallback_count() const;
};

/// Source vertices that already lie on the target (within the self-hit guard)
/// take their closest point and are flagged as fallback.
NormalMatch normal_ray_match(const TriMesh& source, const SpatialIndex& target,
                             const NormalMatchOptions& options = {});

/// Origins are every `origin_stride`-th face vertex (ceil(N / stride) of
/// them); ray (j, k) sits at j * endpoints.size() + k.
RayBundle build_skull_rays(const TriMesh& face, const std::vector<Vec3>& endpoints,
                           int origin_stride = 1);

/// Indices of the face vertices used as origins for a given stride.
std::vector<int> strided_origins(std::size_t vertex_count, int origin_stride);

// JSON header line, then little-endian float32 blocks for C and D and one
// byte per mask entry.
void save_hitset(const HitSet& hits, const std::filesystem::path& path);
HitSet load_hitset(const std::filesystem::path& path);

}  // namespace cranio
