// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/region_edit.hpp"
#include "cranio/models/models.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cranio {

struct PhiFitOptions {
  /// Smoothness and control weights of the deformation objective.
  double lambda = 1.0;
  double mu = 1.0;
  /// Minimum fraction of face vertices that need at least one valid point.
  double min_coverage = 0.5;
};

struct PhiFitResult {
  TriMesh mesh;
  std::size_t controlled = 0;
  /// Mean distance from controlled vertices to their targets (mm).
  double control_residual = 0.0;
};

/// Per face vertex: mean of its valid points, and whether it has any.
struct PhiFitTargets {
  std::vector<Vec3> target;
  std::vector<std::uint8_t> has;
};

PhiFitTargets phi_fit_targets(std::span<const Vec3> points, std::span<const std::uint8_t> mask,
                              int n_q);

/// Averages the valid points of every face vertex (entries j * n_q + k) into
/// one control target and deforms `face` onto them. Uncontrolled vertices
/// follow the smoothness prior. The objective has no surface term, so its
/// minimizer is computed directly.
PhiFitResult phi_fit(std::span<const Vec3> points, std::span<const std::uint8_t> mask, int n_q,
                     const TriMesh& face, const PhiFitOptions& options = {});

struct TissueFit {
  TmmCoefficients coeffs;
  /// Squared residual over the entries used, and the same for the best pure
  /// rescaling of the mean.
  double residual = 0.0;
  double baseline_residual = 0.0;
  std::size_t entries = 0;
  int iterations = 0;
};

/// Default ridge: 1e-4 times the largest squared singular value of the
/// basis restricted to the observed entries.
double default_ridge(const TmmModel& model, std::span<const std::uint8_t> mask);

/// Alternating closed-form solves for the tissue coefficients and the
/// global scale. `ridge` < 0 selects default_ridge.
TissueFit fit_tissue(const TissueField& observed, const TmmModel& model, double ridge = -1.0);

enum class FitTarget { Face, Skull, Both };

struct FsmmFitConfig {
  FitTarget which = FitTarget::Face;
  /// Leading identity components to use; <= 0 uses all.
  int components = 0;
  /// Step damping relative to the largest eigenvalue of the normal matrix.
  double damping = 1e-4;
  int max_iterations = 200;
  double tolerance = 1e-8;
};

struct FsmmFit {
  FsmmCoefficients coeffs;
  double rmse = 0.0;
  int iterations = 0;
  std::vector<double> rmse_history;
};

/// Alternates closed-form pose, damped linear identity updates and
/// closest-point correspondences. A target with exactly the model's vertex
/// count for `which` seeds the pose from vertex order.
FsmmFit fit_fsmm_to_mesh(const TriMesh& target, const FsmmModel& model, const FsmmFitConfig& cfg = {});
FsmmFit fit_fsmm_to_points(std::span<const Vec3> target, const FsmmModel& model,
                           const FsmmFitConfig& cfg = {});

struct SurgeryPlan {
  TriMesh skull_before;
  TriMesh skull_plan;
  std::map<std::string, Affine34> transforms;

  void validate() const;
};

/// Applies per-region transforms to a registered skull.
SurgeryPlan make_surgery_plan(const TriMesh& skull_before, const RegionLabels& regions,
                              const std::map<std::string, Affine34>& transforms,
                              double band_mm = 5.0);

struct PredictOptions {
  int n_q = 3;
  /// Carry each hit's offset from its anchor vertex, so an unchanged plan
  /// reproduces the face exactly. false uses the bare anchor vertex.
  bool anchor_offset = true;
  /// Replace the measured thickness by its projection onto the tissue model.
  bool regularize_tissue = false;
  double ridge = -1.0;
  PhiFitOptions fit;
};

struct PredictionResult {
  TriMesh face;
  std::vector<double> displacement;
  std::optional<TmmCoefficients> tissue;
  nlohmann::json diagnostics = nlohmann::json::object();
};

/// Preoperative tissue rays of a case: hits on the skull and their anchor
/// vertices. Depends only on the preoperative pair, so it can be cached.
struct SurgeryTransport {
  int n_q = 3;
  HitSet hits;
  IndexMap anchors;
  double valid_fraction = 0.0;
};

/// `face_landmarks` are template landmark indices valid on `face_before`.
/// Throws ValidationError when fewer than half of the rays hit the skull.
SurgeryTransport prepare_transport(const TriMesh& face_before, const TriMesh& skull_before,
                                   const LandmarkSet& face_landmarks, int n_q = 3);

PredictionResult predict_surgery(const TriMesh& face_before, const TriMesh& skull_before,
                                 const TriMesh& skull_plan, const SurgeryTransport& transport,
                                 const TmmModel* tmm = nullptr, const PredictOptions& options = {});

PredictionResult predict_surgery(const TriMesh& face_before, const TriMesh& skull_before,
                                 const TriMesh& skull_plan, const LandmarkSet& face_landmarks,
                                 const TmmModel* tmm = nullptr, const PredictOptions& options = {});

struct MorphFrame {
  double t = 0.0;
  TriMesh mesh;
  std::vector<double> displacement;
};

MorphFrame interpolate_morph(const TriMesh& source, const TriMesh& target, double t);

}  // namespace cranio
