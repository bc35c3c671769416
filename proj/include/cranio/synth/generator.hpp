// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/pipeline/template_set.hpp"
#include "cranio/synth/templates.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cranio::synth {

/// Smooth radial-basis displacement.
struct Bump {
  Vec3 center = Vec3::Zero();
  Vec3 amplitude = Vec3::Zero();  // mm
  double sigma = 40.0;            // mm
};

inline constexpr int kThicknessModes = 4;

struct SynthParams {
  std::uint64_t seed = 0;
  // Shape warp, applied before the pose.
  Vec3 scale = Vec3::Ones();
  std::vector<Bump> bumps;
  // Rigid pose of the subject (degrees, XYZ; mm).
  Vec3 rotation_deg = Vec3::Zero();
  Vec3 translation = Vec3::Zero();
  // Multiplicative low-frequency thickness modulation and additive fat (mm).
  std::array<double, kThicknessModes> thickness_modes{};
  double fat = 0.0;
  /// 0 symmetric, 1 strong one-sided deformity (right side thin and
  /// displaced, left side thickened).
  double asymmetry = 0.0;
  /// Additive RGB shift of the template skin colour.
  Vec3 skin_tint = Vec3::Zero();
  /// Raw-scan grid density relative to the template (1 keeps the template
  /// grid; other values retriangulate at a half-cell offset).
  double resample = 0.8;
  /// Gaussian vertex jitter of the raw scans (mm).
  double jitter = 0.05;

  /// Throws ValidationError when the warp may fold or thickness goes non-positive.
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthParams& p);
void from_json(const nlohmann::json& j, SynthParams& p);

/// Shape warp W = pose * (scale + bumps + one-sided deformity bump).
class Warp {
 public:
  explicit Warp(const SynthParams& params);
  Vec3 operator()(const Vec3& x) const;
  /// Warp without the rigid pose.
  Vec3 shape(const Vec3& x) const;
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

 private:
  Vec3 scale_;
  std::vector<Bump> bumps_;
  Mat3 rotation_;
  Vec3 translation_;
};

/// Paired ground truth in template topology plus scan-like raw meshes.
struct SynthCase {
  std::string id;
  SynthParams params;

  TriMesh face;   // template topology
  TriMesh skull;  // template topology
  /// Skull anchor under each face vertex and the thickness vector face - anchor.
  std::vector<Vec3> anchors;
  std::vector<Vec3> thickness;

  TriMesh face_scan;
  TriMesh skull_ct;
  /// Template parameters (azimuth, elevation) of every raw vertex: the raw
  /// vertex is the case surface at that template point, plus jitter.
  std::vector<Vec2> face_scan_params;
  std::vector<Vec2> skull_ct_params;
  /// Raw vertices before jitter.
  std::vector<Vec3> face_scan_clean;
  std::vector<Vec3> skull_ct_clean;

  std::map<std::string, Vec3> face_landmarks;
  std::map<std::string, Vec3> skull_landmarks;
};

/// Evaluates one case's surfaces at arbitrary template parameters.
class CaseSurface {
 public:
  CaseSurface(const HeadShape& shape, const SynthParams& params);

  Vec3 skull(double azimuth, double elevation) const;
  Vec3 face(double azimuth, double elevation) const;
  /// Thickness multiplier field (1 = template thickness).
  double thickness_factor(double azimuth, double elevation) const;
  Vec3 albedo(double azimuth, double elevation) const;
  const Warp& warp() const { return warp_; }

 private:
  const HeadShape& shape_;
  SynthParams params_;
  Warp warp_;
};

SynthCase generate_case(const HeadTemplates& templates, const SynthParams& params,
                        std::string id = "0000");

/// Ranges for random parameter draws.
struct SynthSpread {
  double scale = 0.06;            // relative, per axis
  int bumps = 4;
  double bump_amplitude = 4.0;    // mm, per component bound
  double bump_sigma_min = 40.0;   // mm
  double bump_sigma_max = 60.0;
  double rotation_deg = 8.0;
  double translation = 10.0;      // mm
  double thickness_mode = 0.2;
  double fat_min = -0.5;
  double fat_max = 1.5;
  double asymmetry_max = 0.4;
  double skin_tint = 0.05;
  double resample = 0.8;
  double jitter = 0.05;
};

SynthParams draw_params(std::uint64_t seed, const SynthSpread& spread);

/// n >= 2 independent cases; case i uses a seed derived from (seed, i).
std::vector<SynthCase> generate_corpus(const HeadTemplates& templates, int n, std::uint64_t seed,
                                       const SynthSpread& spread = {});

/// Ground-truth postoperative pair for region transforms applied to the
/// case's skull. The face moves with the displacement at each vertex's anchor.
struct PostopTruth {
  TriMesh skull_plan;
  TriMesh face_after;
};
PostopTruth make_postop_truth(const SynthCase& c, const HeadTemplates& templates,
                              const std::map<std::string, Affine34>& transforms,
                              double band_mm = 5.0);

/// Writes case_<id>/{face_scan.ply, skull_ct.ply, landmarks.json} and a
/// ground_truth/ subdirectory. Returns the case directory.
std::filesystem::path write_case(const SynthCase& c, const std::filesystem::path& root);

TemplateSet template_set(const HeadTemplates& templates);

/// Template fixture files in the load_template_set layout.
void write_templates(const HeadTemplates& templates, const std::filesystem::path& dir);

}  // namespace cranio::synth
