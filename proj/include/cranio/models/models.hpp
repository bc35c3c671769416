// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/pipeline/registration.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cranio {

/// Joint face/skull shape model plus an independent face albedo model.
/// Shape vectors stack face then skull vertices, xyz interleaved.
struct FsmmModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;
  Eigen::VectorXd singular_values;
  double total_variance = 0.0;
  int rank = 0;

  Eigen::VectorXd albedo_mean;
  Eigen::MatrixXd albedo_basis;
  Eigen::VectorXd albedo_singular_values;
  double albedo_total_variance = 0.0;
  int albedo_rank = 0;

  std::vector<Face> face_faces;
  std::vector<Face> skull_faces;
  std::size_t face_vertices = 0;
  std::size_t skull_vertices = 0;
  std::size_t samples = 0;

  int n_id() const { return static_cast<int>(basis.cols()); }
  int n_alb() const { return static_cast<int>(albedo_basis.cols()); }
  std::size_t vertices() const { return face_vertices + skull_vertices; }
  /// Fraction of training variance captured by each kept component.
  Eigen::VectorXd explained_variance_ratio() const;
  void validate() const;
};

struct FsmmCoefficients {
  Eigen::VectorXd id;
  Eigen::VectorXd albedo;
  /// Intrinsic XYZ angles (radians) and translation (mm).
  Vec3 angles = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  static FsmmCoefficients zero(const FsmmModel& model);
  void validate(const FsmmModel& model) const;
};

/// `n_id` / `n_alb` <= 0 keep the full rank; requests above it are clamped.
FsmmModel build_fsmm(std::span<const RegistrationCase> cases, int n_id = 0, int n_alb = 0);

/// Mean plus basis expansion, without pose.
Eigen::VectorXd fsmm_shape(const FsmmModel& model, const Eigen::VectorXd& id);
/// Basis coordinates of a stacked shape vector (orthogonal projection).
Eigen::VectorXd fsmm_project(const FsmmModel& model, const Eigen::VectorXd& shape);
Eigen::VectorXd stack_shape(const TriMesh& face, const TriMesh& skull);

struct FsmmSample {
  TriMesh face;
  TriMesh skull;
};

FsmmSample sample_fsmm(const FsmmModel& model, const FsmmCoefficients& coeffs);

/// Per-component standard deviation of the training data,
/// singular value / sqrt(samples - 1).
Eigen::VectorXd component_stddev(const Eigen::VectorXd& singular_values, std::size_t samples);

/// Identity and albedo coefficients drawn from N(0, (sigma * stddev)^2);
/// zero pose.
FsmmCoefficients random_fsmm_coefficients(const FsmmModel& model, std::uint64_t seed,
                                          double sigma = 1.0);

/// Tissue vectors for every ray (j, k) at j * n_q + k, with their validity.
struct TissueField {
  std::vector<Vec3> vectors;
  std::vector<std::uint8_t> mask;
  std::size_t size() const { return vectors.size(); }
  std::size_t valid_count() const;
};

/// Tissue thickness model over the rays valid in every training case.
/// Invalid entries are zero in the mean and in every basis column.
struct TmmModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;
  Eigen::VectorXd singular_values;
  double total_variance = 0.0;
  int rank = 0;
  std::vector<std::uint8_t> valid;
  IndexMap index_map;
  int n_q = 3;
  std::size_t face_vertices = 0;
  std::size_t samples = 0;

  std::size_t rays() const { return valid.size(); }
  int n_ti() const { return static_cast<int>(basis.cols()); }
  std::size_t valid_count() const;
  void validate() const;
};

struct TmmCoefficients {
  Eigen::VectorXd ti;
  double scale = 1.0;

  static TmmCoefficients zero(const TmmModel& model);
  void validate(const TmmModel& model) const;
};

/// Cases must share n_q and use every face vertex as a ray origin.
TmmModel build_tmm(std::span<const RegistrationCase> cases, const IndexMap& index_map,
                   int n_ti = 0);

/// (mean + basis * ti) * scale; the scale is applied after synthesis.
TissueField sample_tmm(const TmmModel& model, const TmmCoefficients& coeffs);

/// Tissue coefficients drawn like random_fsmm_coefficients; unit scale.
TmmCoefficients random_tmm_coefficients(const TmmModel& model, std::uint64_t seed,
                                        double sigma = 1.0);

TissueField tissue_field(const HitSet& hits);

/// Template-side skull hits and index map for the given ray settings.
IndexMap template_index_map(const TemplateSet& templates, const SkullRayOptions& rays = {});

enum class StorageType { Float32, Float64 };

/// Binary layout: "BFSM", u32 version, u64 manifest length, JSON manifest,
/// then little-endian blocks in manifest order.
void save_model(const FsmmModel& model, const std::filesystem::path& path,
                StorageType storage = StorageType::Float32);
void save_model(const TmmModel& model, const std::filesystem::path& path,
                StorageType storage = StorageType::Float32);
FsmmModel load_fsmm(const std::filesystem::path& path);
TmmModel load_tmm(const std::filesystem::path& path);
/// "fsmm" or "tmm" from the manifest.
std::string model_kind(const std::filesystem::path& path);

}  // namespace cranio
