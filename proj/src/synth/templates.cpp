// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/synth/templates.hpp"

#include "cranio/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cranio::synth {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

// Gaussian in degrees.
double g(double x, double sigma) { return std::exp(-0.5 * (x * x) / (sigma * sigma)); }

double smoothstep(double lo, double hi, double x) {
  const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

struct NamedParam {
  const char* name;
  double azimuth_deg;
  double elevation_deg;
};

// Face landmarks in parameter space.
constexpr NamedParam kFaceLandmarks[] = {
    {"eye_outer_left", 30, 6},    {"eye_outer_right", -30, 6}, {"eye_inner_left", 10, 5},
    {"eye_inner_right", -10, 5},  {"glabella", 0, 22},         {"nasion", 0, 12},
    {"nose_tip", 0, -5},          {"subnasale", 0, -14},       {"alar_left", 8, -9},
    {"alar_right", -8, -9},       {"upper_lip", 0, -24},       {"lower_lip", 0, -31},
    {"mouth_left", 13, -28},      {"mouth_right", -13, -28},   {"chin", 0, -44},
    {"menton", 0, -54},           {"cheek_left", 40, -10},     {"cheek_right", -40, -10},
    {"jaw_left", 60, -38},        {"jaw_right", -60, -38},     {"tragion_left", 78, 0},
    {"tragion_right", -78, 0},    {"forehead", 0, 45},
};

// Skull landmarks (20), all outside the orbit holes.
constexpr NamedParam kSkullLandmarks[] = {
    {"nasion", 0, 12},
    {"glabella", 0, 22},
    {"bregma", 0, 55},
    {"supraorbital_left", 20, 16},
    {"supraorbital_right", -20, 16},
    {"infraorbital_left", 20, -6},
    {"infraorbital_right", -20, -6},
    {"lateral_orbit_left", 34, 5},
    {"lateral_orbit_right", -34, 5},
    {"zygion_left", 50, -5},
    {"zygion_right", -50, -5},
    {"anterior_nasal_spine", 0, -15},
    {"prosthion", 0, -24},
    {"infradentale", 0, -33},
    {"pogonion", 0, -45},
    {"menton", 0, -56},
    {"gonion_left", 60, -40},
    {"gonion_right", -60, -40},
    {"frontotemporale_left", 35, 32},
    {"frontotemporale_right", -35, 32},
};

int nearest_param(const std::vector<Vec2>& params, double az_deg, double el_deg) {
  const Vec2 target(az_deg * kDeg, el_deg * kDeg);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = (params[i] - target).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

LandmarkSet make_landmarks(std::span<const NamedParam> table, const std::vector<Vec2>& params,
                           const TriMesh& mesh) {
  LandmarkSet set;
  for (const NamedParam& p : table) {
    const int v = nearest_param(params, p.azimuth_deg, p.elevation_deg);
    set.add({p.name, v, mesh.vertices[v]});
  }
  return set;
}

int skull_region(const Vec2& param) {
  const double a = param.x() / kDeg;
  const double e = param.y() / kDeg;
  const double abs_a = std::abs(a);
  // Region ids follow the order of kRegionNames below.
  const double jaw_line = -30.0 + 22.0 * smoothstep(40.0, 70.0, abs_a);
  if (e < jaw_line && abs_a < 80.0) return 1;  // mandible
  if (abs_a < 8.0 && e >= -8.0 && e < 14.0) return 3;  // nasal
  if (abs_a < 30.0 && e < -8.0) return 2;  // maxilla
  if (abs_a >= 30.0 && abs_a < 65.0 && e >= -20.0 && e < 8.0) return a > 0 ? 4 : 5;
  return 0;  // cranium
}

const std::vector<std::string> kRegionNames = {"cranium", "mandible",    "maxilla",
                                               "nasal",   "zygoma_left", "zygoma_right"};

}  // namespace

Vec3 direction(double azimuth, double elevation) {
  return Vec3(std::sin(azimuth) * std::cos(elevation), std::sin(elevation),
              std::cos(azimuth) * std::cos(elevation));
}

double HeadShape::skull_radius(double azimuth, double elevation) const {
  const Vec3 d = direction(azimuth, elevation);
  constexpr double rx = 72.0, ry = 92.0, rz = 96.0;
  double r = 1.0 / std::sqrt((d.x() / rx) * (d.x() / rx) + (d.y() / ry) * (d.y() / ry) +
                             (d.z() / rz) * (d.z() / rz));
  const double a = azimuth / kDeg;
  const double e = elevation / kDeg;
  const double abs_a = std::abs(a);
  r += 5.0 * g(e - 20.0, 7.0) * g(a, 40.0);                     // brow ridge
  r += 7.0 * g(abs_a - 48.0, 12.0) * g(e + 4.0, 9.0);           // zygomatic arch
  r += 4.0 * g(a, 20.0) * g(e + 20.0, 8.0);                     // maxilla
  r += 6.0 * g(a, 12.0) * g(e + 46.0, 8.0);                     // chin
  r += 5.0 * g(a, 6.0) * g(e - 2.0, 8.0);                       // nasal bones
  r -= 4.0 * g(abs_a - 62.0, 12.0) * g(e - 15.0, 12.0);         // temporal fossa
  r -= 10.0 * smoothstep(-20.0, -58.0, e) * smoothstep(25.0, 80.0, abs_a);  // narrow jaw
  return r;
}

double HeadShape::thickness(double azimuth, double elevation) const {
  const double a = azimuth / kDeg;
  const double e = elevation / kDeg;
  const double abs_a = std::abs(a);
  double t = 5.5;
  t -= 1.5 * smoothstep(15.0, 35.0, e);                          // thin forehead
  t += 9.0 * g(abs_a - 38.0, 14.0) * g(e + 12.0, 12.0);          // cheeks
  t += 19.0 * g(a, 5.0) * g(e + 5.0, 5.0);                       // nose tip
  t += 8.0 * g(a, 4.0) * g(e - 5.0, 7.0);                        // nasal ridge
  t += 6.0 * g(abs_a - 8.0, 3.5) * g(e + 9.0, 4.0);              // alae
  t += 8.0 * g(a, 14.0) * g(e + 27.0, 5.0);                      // lips
  t += 4.0 * g(a, 12.0) * g(e + 44.0, 7.0);                      // chin pad
  t += 3.0 * g(abs_a - 20.0, 10.0) * g(e - 5.0, 7.0);            // eyelids
  return t;
}

bool HeadShape::in_orbit(double azimuth, double elevation) const {
  const double a = std::abs(azimuth / kDeg);
  const double e = elevation / kDeg;
  const double u = (a - 20.0) / 12.0;
  const double v = (e - 5.0) / 9.0;
  return u * u + v * v < 1.0;
}

Vec3 HeadShape::albedo(double azimuth, double elevation) const {
  const double a = azimuth / kDeg;
  const double e = elevation / kDeg;
  Vec3 skin(0.78, 0.60, 0.50);
  skin += 0.12 * g(a, 14.0) * g(e + 27.0, 5.0) * Vec3(0.6, -0.4, -0.2);  // lips
  skin += 0.05 * g(std::abs(a) - 38.0, 12.0) * g(e + 12.0, 10.0) * Vec3(0.8, -0.2, -0.2);
  return skin.cwiseMax(0.0).cwiseMin(1.0);
}

TriMesh make_skull_mesh(int cols, int rows) {
  HeadShape shape;
  return make_grid_surface(
             cols, rows, -HeadShape::kSkullAzimuth, HeadShape::kSkullAzimuth,
             HeadShape::kSkullElevationMin, HeadShape::kSkullElevationMax, 0.0,
             [&](double a, double e) { return shape.skull_point(a, e); },
             [&](double a, double e) { return shape.in_orbit(a, e); })
      .mesh;
}

HeadTemplates make_templates(const TemplateResolution& res) {
  if (res.face_cols % 2 == 0 || res.skull_cols % 2 == 0) {
    throw ValidationError("template grids need an odd column count for a midline");
  }
  HeadTemplates t;
  t.resolution = res;
  const HeadShape& shape = t.shape;

  GridSurface face = make_grid_surface(
      res.face_cols, res.face_rows, -HeadShape::kFaceAzimuth, HeadShape::kFaceAzimuth,
      HeadShape::kFaceElevationMin, HeadShape::kFaceElevationMax, 0.0,
      [&](double a, double e) { return shape.face_point(a, e); },
      [](double, double) { return false; });
  GridSurface skull = make_grid_surface(
      res.skull_cols, res.skull_rows, -HeadShape::kSkullAzimuth, HeadShape::kSkullAzimuth,
      HeadShape::kSkullElevationMin, HeadShape::kSkullElevationMax, 0.0,
      [&](double a, double e) { return shape.skull_point(a, e); },
      [&](double a, double e) { return shape.in_orbit(a, e); });

  t.face = std::move(face.mesh);
  t.face_params = std::move(face.params);
  t.face_symmetry = std::move(face.symmetry);
  t.skull = std::move(skull.mesh);
  t.skull_params = std::move(skull.params);
  t.skull_symmetry = std::move(skull.symmetry);

  t.face.albedo.emplace();
  t.face_anchors.reserve(t.face_params.size());
  for (const Vec2& p : t.face_params) {
    t.face.albedo->push_back(shape.albedo(p.x(), p.y()));
    t.face_anchors.push_back(shape.skull_point(p.x(), p.y()));
  }

  t.face_landmarks = make_landmarks(kFaceLandmarks, t.face_params, t.face);
  t.skull_landmarks = make_landmarks(kSkullLandmarks, t.skull_params, t.skull);

  t.skull_regions.names = kRegionNames;
  t.skull_regions.vertex_region.reserve(t.skull_params.size());
  for (const Vec2& p : t.skull_params) t.skull_regions.vertex_region.push_back(skull_region(p));
  return t;
}

}  // namespace cranio::synth
