// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/deform/deform.hpp"
#include "cranio/pipeline/procrustes.hpp"
#include "cranio/pipeline/template_set.hpp"
#include "cranio/raycast/raycast.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cranio {

/// Minimum landmarks for the similarity initializer.
inline constexpr std::size_t kMinInitLandmarks = 7;
/// Minimum jointly valid rays for skull registration.
inline constexpr std::size_t kMinSkullControls = 100;

struct InitialFitResult {
  TriMesh mesh;
  Similarity similarity;
  std::size_t landmarks_used = 0;
};

/// Similarity-aligns the face template to the target landmarks, then runs
/// one soft deformation pass driven by those landmarks and the target surface.
/// `deform_config` with zero iterations stops after the similarity stage.
InitialFitResult initial_face_fit(const TriMesh& face_template, const LandmarkSet& template_landmarks,
                                  const std::map<std::string, Vec3>& target_landmarks,
                                  const TriMesh& target, const DeformConfig& deform_config);

struct FaceRegistration {
  TriMesh mesh;
  NormalMatch match;
  std::size_t controls = 0;
  DeformResult deform;
};

/// Dense normal-ray controls from `initial` onto `scan`, then one deformation.
/// Fallback correspondences are not used as controls.
FaceRegistration register_face(const TriMesh& initial, const TriMesh& scan,
                               const DeformConfig& config, const NormalMatchOptions& match = {});

/// Ray endpoints behind the head from the face landmarks. Requires
/// tragion_left/right, eye_outer_left/right, menton and nose_tip.
std::vector<Vec3> psi_map(const std::map<std::string, Vec3>& face_landmarks, int n_q = 3);
std::vector<Vec3> psi_map(const TriMesh& face, const LandmarkSet& template_landmarks,
                          int n_q = 3);

struct SkullRayOptions {
  int n_q = 3;
  int origin_stride = 1;
};

struct SkullRegistration {
  TriMesh mesh;
  HitSet subject_hits;   // rays of the registered face against the subject skull
  HitSet template_hits;  // same rays on the template pair
  std::size_t joint_valid = 0;
  Similarity prealign;
  DeformResult deform;
};

/// Casts matching ray bundles from the registered face and from the face
/// template, pairs their skull hits where both are valid, and deforms the
/// (similarity pre-aligned) skull template onto the subject skull.
SkullRegistration register_skull(const TriMesh& face, const TriMesh& skull_ct,
                                 const TriMesh& face_template, const TriMesh& skull_template,
                                 const LandmarkSet& face_landmarks, const DeformConfig& config,
                                 const SkullRayOptions& rays = {});

/// Same skull deformation driven only by sparse landmark pairs.
DeformResult register_skull_sparse(const TriMesh& skull_ct, const TriMesh& skull_template,
                                   const LandmarkSet& skull_landmarks,
                                   const std::map<std::string, Vec3>& target_landmarks,
                                   const Similarity& prealign, const DeformConfig& config);

/// Skull-template vertex under every ray; invalid rays fall back to the
/// vertex nearest their origin and are flagged.
struct IndexMap {
  std::vector<int> index;
  std::vector<std::uint8_t> fallback;
  std::size_t size() const { return index.size(); }
};

IndexMap build_index_map(const TriMesh& skull, const HitSet& hits,
                         const std::vector<Vec3>& ray_origins);

/// Everything the models are built from, in template topology.
struct RegistrationCase {
  std::string id;
  TriMesh face;
  TriMesh skull;
  /// Hit points, thickness vectors (face - skull) and mask, ray (j, k) at j * n_q + k.
  HitSet tissue;
  int n_q = 3;
  int origin_stride = 1;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Mirror across x = 0 with vertex relabelling; requires origin_stride 1.
RegistrationCase flip_augment(const RegistrationCase& c, const std::vector<int>& face_symmetry,
                              const std::vector<int>& skull_symmetry);

/// <dir>/registered/{face.ply, skull.ply, tissue.bin, meta.json}
void save_registration(const RegistrationCase& c, const std::filesystem::path& case_dir);
RegistrationCase load_registration(const std::filesystem::path& case_dir);

struct RegistrationOptions {
  DeformConfig init = DeformConfig::defaults();
  DeformConfig face = DeformConfig::defaults();
  DeformConfig skull = DeformConfig::defaults();
  NormalMatchOptions match;
  SkullRayOptions rays;
};

void to_json(nlohmann::json& j, const RegistrationOptions& o);
void from_json(const nlohmann::json& j, RegistrationOptions& o);

/// Colour of the closest source surface point for every mesh vertex.
std::vector<Vec3> transfer_albedo(const TriMesh& mesh, const TriMesh& source);

struct RegistrationReport {
  RegistrationCase registered;
  InitialFitResult init;
  FaceRegistration face;
  SkullRegistration skull;
};

/// Full chain: initial fit, dense face registration, skull registration.
RegistrationReport register_subject(const TemplateSet& templates, const TriMesh& face_scan,
                                    const TriMesh& skull_ct,
                                    const std::map<std::string, Vec3>& face_landmarks,
                                    const RegistrationOptions& options, std::string id = {});

/// Reads case_<id>/{face_scan.ply, skull_ct.ply, landmarks.json}, registers
/// it and records input/config hashes in the provenance block.
RegistrationCase register_case_directory(const TemplateSet& templates,
                                         const std::filesystem::path& case_dir,
                                         const RegistrationOptions& options);

}  // namespace cranio
