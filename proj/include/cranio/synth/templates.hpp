// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"
#include "cranio/geometry/region_edit.hpp"
#include "cranio/pipeline/landmarks.hpp"

#include <Eigen/Core>

#include <vector>

namespace cranio::synth {

using Vec2 = Eigen::Vector2d;

/// Head-centred frame: +X subject's left, +Y up, +Z anterior. Surfaces are
/// radial graphs over (azimuth, elevation) in radians; azimuth 0 faces +Z and
/// grows toward +X.
Vec3 direction(double azimuth, double elevation);

/// Closed-form template anatomy. The skull is an open half-shell (no back of
/// the head) with two orbit holes; the face is the skull pushed outward by a
/// soft-tissue thickness profile.
class HeadShape {
 public:
  double skull_radius(double azimuth, double elevation) const;
  /// Template soft-tissue thickness (mm) measured radially.
  double thickness(double azimuth, double elevation) const;

  Vec3 skull_point(double azimuth, double elevation) const {
    return skull_radius(azimuth, elevation) * direction(azimuth, elevation);
  }
  Vec3 face_point(double azimuth, double elevation) const {
    return (skull_radius(azimuth, elevation) + thickness(azimuth, elevation)) *
           direction(azimuth, elevation);
  }
  bool in_orbit(double azimuth, double elevation) const;
  /// Template skin colour.
  Vec3 albedo(double azimuth, double elevation) const;

  // Parameter domains (radians).
  static constexpr double kFaceAzimuth = 80.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kFaceElevationMin = -56.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kFaceElevationMax = 60.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kSkullAzimuth = 110.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kSkullElevationMin = -60.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kSkullElevationMax = 72.0 * 3.14159265358979323846 / 180.0;
};

struct TemplateResolution {
  int face_cols = 91;  // odd so the midline is a vertex column
  int face_rows = 89;
  int skull_cols = 73;
  int skull_rows = 71;

  /// ~8k face vertices, ~5k skull vertices.
  static TemplateResolution desk() { return {}; }
  /// ~36k face vertices, ~23k skull vertices.
  static TemplateResolution full() { return {191, 187, 159, 147}; }
};

/// Regular (azimuth, elevation) grid surface. Rows run bottom to top, columns
/// right to left of the subject (azimuth ascending). Triangulation is
/// mirror-symmetric about the midline column.
struct GridSurface {
  TriMesh mesh;
  std::vector<Vec2> params;
  /// Mirror partner of every vertex.
  std::vector<int> symmetry;
};

/// Builds a grid over [az_min, az_max] x [el_min, el_max]; `offset` shifts
/// the sample positions by that fraction of a cell (used for re-sampled scans).
/// Faces whose parameter centroid satisfies `drop` are removed together with
/// unreferenced vertices.
template <typename PointFn, typename DropFn>
GridSurface make_grid_surface(int cols, int rows, double az_min, double az_max, double el_min,
                              double el_max, double offset, PointFn point, DropFn drop);

/// Fixed face/skull template pair with everything derived from it.
struct HeadTemplates {
  HeadShape shape;
  TemplateResolution resolution;
  TriMesh face;
  TriMesh skull;
  std::vector<Vec2> face_params;
  std::vector<Vec2> skull_params;
  std::vector<int> face_symmetry;
  std::vector<int> skull_symmetry;
  LandmarkSet face_landmarks;
  LandmarkSet skull_landmarks;
  RegionLabels skull_regions;
  /// Radial skull anchor (template frame) under each face vertex.
  std::vector<Vec3> face_anchors;
};

HeadTemplates make_templates(const TemplateResolution& resolution = TemplateResolution::desk());

/// Skull-only template at a chosen grid size (used for intersection tests).
TriMesh make_skull_mesh(int cols, int rows);

// ---------------------------------------------------------------------------

template <typename PointFn, typename DropFn>
GridSurface make_grid_surface(int cols, int rows, double az_min, double az_max, double el_min,
                              double el_max, double offset, PointFn point, DropFn drop) {
  GridSurface full;
  const double da = (az_max - az_min) / (cols - 1);
  const double de = (el_max - el_min) / (rows - 1);
  auto param = [&](int r, int c) {
    return Vec2(az_min + (c + offset) * da, el_min + (r + offset) * de);
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Vec2 p = param(r, c);
      full.params.push_back(p);
      full.mesh.vertices.push_back(point(p.x(), p.y()));
      full.symmetry.push_back(r * cols + (cols - 1 - c));
    }
  }
  const int mid = (cols - 1) / 2;
  std::vector<bool> keep;
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      std::array<Face, 2> tris;
      if (c < mid) {
        tris = {Face{id(r, c), id(r, c + 1), id(r + 1, c + 1)},
                Face{id(r, c), id(r + 1, c + 1), id(r + 1, c)}};
      } else {
        tris = {Face{id(r, c), id(r, c + 1), id(r + 1, c)},
                Face{id(r, c + 1), id(r + 1, c + 1), id(r + 1, c)}};
      }
      for (const Face& f : tris) {
        const Vec2 centroid =
            (full.params[f[0]] + full.params[f[1]] + full.params[f[2]]) / 3.0;
        full.mesh.faces.push_back(f);
        keep.push_back(!drop(centroid.x(), centroid.y()));
      }
    }
  }
  std::vector<int> remap;
  GridSurface out;
  out.mesh = extract_faces(full.mesh, keep, &remap);
  out.params.resize(out.mesh.vertices.size());
  out.symmetry.resize(out.mesh.vertices.size());
  for (std::size_t v = 0; v < remap.size(); ++v) {
    if (remap[v] < 0) continue;
    out.params[remap[v]] = full.params[v];
    out.symmetry[remap[v]] = remap[full.symmetry[v]];
  }
  return out;
}

}  // namespace cranio::synth
