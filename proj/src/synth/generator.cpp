// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/synth/generator.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/raycast/raycast.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace cranio::synth {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;
// Max slope of a unit Gaussian bump is exp(-1/2) / sigma.
constexpr double kGaussSlope = 0.60653065971263342;
constexpr double kFoldBudget = 0.5;
constexpr double kMinThickness = 0.5;

double smoothstep(double lo, double hi, double x) {
  const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double gauss_deg(double x, double sigma) { return std::exp(-0.5 * x * x / (sigma * sigma)); }

// One-sided deformity: pushes the right jaw and cheek toward the midline.
Bump deformity_bump(double asymmetry) {
  static const HeadShape shape;
  return {shape.skull_point(-55.0 * kDeg, -30.0 * kDeg), asymmetry * Vec3(5.0, -2.0, -2.0), 40.0};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::map<std::string, Vec3> landmark_map(const LandmarkSet& set, const TriMesh& mesh) {
  std::map<std::string, Vec3> out;
  for (const Landmark& l : set.items()) out[l.name] = mesh.vertices[l.vertex];
  return out;
}

// Raw-scan grid size for a template grid dimension.
int raw_count(int n, double resample) {
  int m = static_cast<int>(std::lround(n * resample));
  if (m % 2 == 0) ++m;
  return std::max(m, 5);
}

}  // namespace

// ---------------------------------------------------------------------------

void SynthParams::validate() const {
  if (!((scale.array() > 0.5).all() && (scale.array() < 2.0).all())) {
    throw ValidationError("synth scale factors must lie in (0.5, 2)");
  }
  double slope = 0.0;
  for (const Bump& b : bumps) {
    if (!(b.sigma > 0.0)) throw ValidationError("bump sigma must be positive");
    slope += kGaussSlope * b.amplitude.norm() / b.sigma;
  }
  if (asymmetry < 0.0 || asymmetry > 1.0) throw ValidationError("asymmetry must lie in [0, 1]");
  const Bump d = deformity_bump(asymmetry);
  slope += kGaussSlope * d.amplitude.norm() / d.sigma;
  if (slope >= kFoldBudget * scale.minCoeff()) {
    throw ValidationError("warp may fold (bump slope sum " + std::to_string(slope) +
                          "); use smaller amplitudes or wider bumps");
  }
  for (double c : thickness_modes) {
    if (std::abs(c) > 0.45) throw ValidationError("thickness modulation must stay within 0.45");
  }
  if (!(resample > 0.2 && resample <= 2.0)) throw ValidationError("resample must lie in (0.2, 2]");
  if (!(jitter >= 0.0)) throw ValidationError("jitter must be non-negative");
}

void to_json(nlohmann::json& j, const SynthParams& p) {
  nlohmann::json bumps = nlohmann::json::array();
  for (const Bump& b : p.bumps) {
    bumps.push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                     {"amplitude", {b.amplitude.x(), b.amplitude.y(), b.amplitude.z()}},
                     {"sigma", b.sigma}});
  }
  j = {{"seed", p.seed},
       {"scale", {p.scale.x(), p.scale.y(), p.scale.z()}},
       {"bumps", bumps},
       {"rotation_deg", {p.rotation_deg.x(), p.rotation_deg.y(), p.rotation_deg.z()}},
       {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
       {"thickness_modes", p.thickness_modes},
       {"fat", p.fat},
       {"asymmetry", p.asymmetry},
       {"skin_tint", {p.skin_tint.x(), p.skin_tint.y(), p.skin_tint.z()}},
       {"resample", p.resample},
       {"jitter", p.jitter}};
}

void from_json(const nlohmann::json& j, SynthParams& p) {
  auto vec = [](const nlohmann::json& a) {
    return Vec3(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
  };
  p.seed = j.value("seed", p.seed);
  if (j.contains("scale")) p.scale = vec(j.at("scale"));
  if (j.contains("bumps")) {
    p.bumps.clear();
    for (const auto& b : j.at("bumps")) {
      p.bumps.push_back({vec(b.at("center")), vec(b.at("amplitude")), b.at("sigma").get<double>()});
    }
  }
  if (j.contains("rotation_deg")) p.rotation_deg = vec(j.at("rotation_deg"));
  if (j.contains("translation")) p.translation = vec(j.at("translation"));
  if (j.contains("thickness_modes")) {
    p.thickness_modes = j.at("thickness_modes").get<std::array<double, kThicknessModes>>();
  }
  p.fat = j.value("fat", p.fat);
  p.asymmetry = j.value("asymmetry", p.asymmetry);
  if (j.contains("skin_tint")) p.skin_tint = vec(j.at("skin_tint"));
  p.resample = j.value("resample", p.resample);
  p.jitter = j.value("jitter", p.jitter);
}

// ---------------------------------------------------------------------------

Warp::Warp(const SynthParams& params)
    : scale_(params.scale),
      bumps_(params.bumps),
      rotation_(rotation_xyz(params.rotation_deg * kDeg)),
      translation_(params.translation) {
  if (params.asymmetry > 0.0) bumps_.push_back(deformity_bump(params.asymmetry));
}

Vec3 Warp::shape(const Vec3& x) const {
  Vec3 y = scale_.cwiseProduct(x);
  for (const Bump& b : bumps_) {
    const double r2 = (x - b.center).squaredNorm();
    y += b.amplitude * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
  }
  return y;
}

Vec3 Warp::operator()(const Vec3& x) const { return rotation_ * shape(x) + translation_; }

CaseSurface::CaseSurface(const HeadShape& shape, const SynthParams& params)
    : shape_(shape), params_(params), warp_(params) {}

Vec3 CaseSurface::skull(double a, double e) const { return warp_(shape_.skull_point(a, e)); }

double CaseSurface::thickness_factor(double a, double e) const {
  const double ad = a / kDeg;
  const double ed = e / kDeg;
  const std::array<double, kThicknessModes> basis = {
      ed / 60.0, (ad / 80.0) * (ad / 80.0) - 0.33, gauss_deg(ed + 25.0, 15.0),
      gauss_deg(std::abs(ad) - 40.0, 15.0)};
  double m = 1.0;
  for (int k = 0; k < kThicknessModes; ++k) m += params_.thickness_modes[k] * basis[k];
  const double side = ad < 0.0 ? 1.0 - 0.45 * params_.asymmetry * smoothstep(0.0, 30.0, -ad)
                               : 1.0 + 0.2 * params_.asymmetry * smoothstep(0.0, 30.0, ad);
  return m * side;
}

Vec3 CaseSurface::albedo(double a, double e) const {
  return (shape_.albedo(a, e) + params_.skin_tint).cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 CaseSurface::face(double a, double e) const {
  // Warped template face, pushed along its normal by the thickness change.
  constexpr double h = 1e-5;
  auto base = [&](double aa, double ee) { return warp_(shape_.face_point(aa, ee)); };
  const Vec3 p = base(a, e);
  const Vec3 da = base(a + h, e) - base(a - h, e);
  const Vec3 de = base(a, e + h) - base(a, e - h);
  Vec3 n = da.cross(de).normalized();
  if (n.dot(p - skull(a, e)) < 0.0) n = -n;
  const double t = shape_.thickness(a, e);
  const double delta = t * (thickness_factor(a, e) - 1.0) + params_.fat;
  if (t + delta < kMinThickness) {
    throw ValidationError("synthetic thickness drops below " + std::to_string(kMinThickness) +
                          " mm; reduce the thickness modulation");
  }
  return p + delta * n;
}

// ---------------------------------------------------------------------------

SynthCase generate_case(const HeadTemplates& t, const SynthParams& params, std::string id) {
  params.validate();
  const CaseSurface surf(t.shape, params);
  SynthCase c;
  c.id = std::move(id);
  c.params = params;

  c.face.faces = t.face.faces;
  c.face.albedo.emplace();
  c.face.vertices.reserve(t.face_params.size());
  c.anchors.reserve(t.face_params.size());
  c.thickness.reserve(t.face_params.size());
  for (const Vec2& p : t.face_params) {
    const Vec3 f = surf.face(p.x(), p.y());
    const Vec3 s = surf.skull(p.x(), p.y());
    c.face.vertices.push_back(f);
    c.face.albedo->push_back(surf.albedo(p.x(), p.y()));
    c.anchors.push_back(s);
    c.thickness.push_back(f - s);
  }
  c.skull.faces = t.skull.faces;
  c.skull.vertices.reserve(t.skull_params.size());
  for (const Vec2& p : t.skull_params) c.skull.vertices.push_back(surf.skull(p.x(), p.y()));

  std::mt19937_64 rng(splitmix64(params.seed ^ 0x5ca1ab1eULL));
  std::normal_distribution<double> noise(0.0, 1.0);
  auto jittered = [&](const std::vector<Vec3>& clean) {
    std::vector<Vec3> out = clean;
    if (params.jitter > 0.0) {
      for (Vec3& v : out) v += params.jitter * Vec3(noise(rng), noise(rng), noise(rng));
    }
    return out;
  };

  // Raw scans: a different grid over the same surfaces.
  auto raw = [&](int cols, int rows, double az0, double az1, double el0, double el1,
                 auto point, auto drop, std::vector<Vec2>& params_out,
                 std::vector<Vec3>& clean_out) {
    GridSurface g;
    if (params.resample == 1.0) {
      g = make_grid_surface(cols, rows, az0, az1, el0, el1, 0.0, point, drop);
    } else {
      const int rc = raw_count(cols, params.resample);
      const int rr = raw_count(rows, params.resample);
      const double da = (az1 - az0) / (rc - 1);
      const double de = (el1 - el0) / (rr - 1);
      g = make_grid_surface(rc, rr, az0, az1 - da, el0, el1 - de, 0.5, point, drop);
    }
    params_out = g.params;
    clean_out = g.mesh.vertices;
    g.mesh.vertices = jittered(clean_out);
    return g.mesh;
  };

  const TemplateResolution& res = t.resolution;
  c.face_scan = raw(
      res.face_cols, res.face_rows, -HeadShape::kFaceAzimuth, HeadShape::kFaceAzimuth,
      HeadShape::kFaceElevationMin, HeadShape::kFaceElevationMax,
      [&](double a, double e) { return surf.face(a, e); }, [](double, double) { return false; },
      c.face_scan_params, c.face_scan_clean);
  c.face_scan.albedo.emplace();
  for (const Vec2& p : c.face_scan_params) {
    c.face_scan.albedo->push_back(surf.albedo(p.x(), p.y()));
  }
  c.skull_ct = raw(
      res.skull_cols, res.skull_rows, -HeadShape::kSkullAzimuth, HeadShape::kSkullAzimuth,
      HeadShape::kSkullElevationMin, HeadShape::kSkullElevationMax,
      [&](double a, double e) { return surf.skull(a, e); },
      [&](double a, double e) { return t.shape.in_orbit(a, e); }, c.skull_ct_params,
      c.skull_ct_clean);

  c.face_landmarks = landmark_map(t.face_landmarks, c.face);
  c.skull_landmarks = landmark_map(t.skull_landmarks, c.skull);
  return c;
}

SynthParams draw_params(std::uint64_t seed, const SynthSpread& s) {
  std::mt19937_64 rng(splitmix64(seed));
  auto uni = [&](double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  };
  static const HeadShape shape;
  SynthParams p;
  p.seed = seed;
  for (int k = 0; k < 3; ++k) p.scale[k] = 1.0 + uni(-s.scale, s.scale);
  for (int b = 0; b < s.bumps; ++b) {
    Bump bump;
    bump.center = shape.skull_point(uni(-70.0, 70.0) * kDeg, uni(-50.0, 60.0) * kDeg);
    for (int k = 0; k < 3; ++k) bump.amplitude[k] = uni(-s.bump_amplitude, s.bump_amplitude);
    bump.sigma = uni(s.bump_sigma_min, s.bump_sigma_max);
    p.bumps.push_back(bump);
  }
  for (int k = 0; k < 3; ++k) p.rotation_deg[k] = uni(-s.rotation_deg, s.rotation_deg);
  for (int k = 0; k < 3; ++k) p.translation[k] = uni(-s.translation, s.translation);
  for (double& c : p.thickness_modes) c = uni(-s.thickness_mode, s.thickness_mode);
  p.fat = uni(s.fat_min, s.fat_max);
  p.asymmetry = uni(0.0, s.asymmetry_max);
  for (int k = 0; k < 3; ++k) p.skin_tint[k] = uni(-s.skin_tint, s.skin_tint);
  p.resample = s.resample;
  p.jitter = s.jitter;
  return p;
}

std::vector<SynthCase> generate_corpus(const HeadTemplates& templates, int n, std::uint64_t seed,
                                       const SynthSpread& spread) {
  if (n < 2) throw ValidationError("a corpus needs at least two cases");
  std::vector<SynthCase> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "%04d", i);
    const std::uint64_t case_seed = splitmix64(seed * 1000003ULL + static_cast<std::uint64_t>(i));
    out.push_back(generate_case(templates, draw_params(case_seed, spread), id));
  }
  return out;
}

PostopTruth make_postop_truth(const SynthCase& c, const HeadTemplates& templates,
                              const std::map<std::string, Affine34>& transforms, double band_mm) {
  RegionEditor editor(c.skull.vertices, templates.skull_regions, band_mm);
  editor.set_transforms(transforms);
  PostopTruth out;
  out.skull_plan = c.skull;
  out.skull_plan.vertices = editor.apply();
  out.face_after = c.face;
  for (std::size_t j = 0; j < c.anchors.size(); ++j) {
    out.face_after.vertices[j] += editor.displacement(c.anchors[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json params_json(const std::vector<Vec2>& params) {
  nlohmann::json a = nlohmann::json::array();
  for (const Vec2& p : params) a.push_back({p.x(), p.y()});
  return a;
}

}  // namespace

std::filesystem::path write_case(const SynthCase& c, const std::filesystem::path& root) {
  const std::filesystem::path dir = root / ("case_" + c.id);
  const std::filesystem::path gt = dir / "ground_truth";
  std::filesystem::create_directories(gt);
  save_mesh(c.face_scan, dir / "face_scan.ply");
  save_mesh(c.skull_ct, dir / "skull_ct.ply");
  save_landmark_positions(c.face_landmarks, dir / "landmarks.json");

  save_mesh(c.face, gt / "face.ply");
  save_mesh(c.skull, gt / "skull.ply");
  save_landmark_positions(c.skull_landmarks, gt / "skull_landmarks.json");
  HitSet tissue;
  tissue.resize_invalid(c.thickness.size());
  for (std::size_t j = 0; j < c.thickness.size(); ++j) {
    tissue.set(j, c.face.vertices[j], c.anchors[j]);
  }
  save_hitset(tissue, gt / "thickness.bin");
  nlohmann::json params;
  to_json(params, c.params);
  write_json(params, gt / "params.json");
  write_json({{"face_scan", params_json(c.face_scan_params)},
              {"skull_ct", params_json(c.skull_ct_params)}},
             gt / "correspondence.json");
  return dir;
}

TemplateSet template_set(const HeadTemplates& t) {
  TemplateSet out;
  out.face = t.face;
  out.skull = t.skull;
  out.face_landmarks = t.face_landmarks;
  out.skull_landmarks = t.skull_landmarks;
  out.face_symmetry = t.face_symmetry;
  out.skull_symmetry = t.skull_symmetry;
  out.skull_regions = t.skull_regions;
  return out;
}

void write_templates(const HeadTemplates& t, const std::filesystem::path& dir) {
  save_template_set(template_set(t), dir);
}

}  // namespace cranio::synth
