// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/deform/amsgrad.hpp"
#include "cranio/geometry/laplacian.hpp"
#include "cranio/geometry/spatial_index.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace cranio {

/// Per-vertex 3x4 affine transform [A | b], column-major so the field can be
/// viewed as one flat parameter vector (12 doubles per vertex).
using VertexAffine = Eigen::Matrix<double, 3, 4>;

/// Works in the source's normalized frame: x_i = A_i * (v_i - c) / s + b_i,
/// with c the source centroid and s its bbox diagonal.
struct AffineField {
  std::vector<VertexAffine> transforms;

  static AffineField identity(std::size_t n);
  std::size_t size() const { return transforms.size(); }
  std::span<double> flat() { return {transforms.empty() ? nullptr : transforms.front().data(),
                                     transforms.size() * 12}; }
  std::span<const double> flat() const {
    return {transforms.empty() ? nullptr : transforms.front().data(), transforms.size() * 12};
  }
};

/// Positionally paired control points (mm). Sources must lie on or near the
/// source mesh.
struct ControlPairs {
  std::vector<Vec3> source;
  std::vector<Vec3> target;

  std::size_t size() const { return source.size(); }
};

struct LambdaStage {
  int iteration;
  double lambda;
};

struct DeformConfig {
  /// Smoothness weight when `schedule` is empty.
  double lambda = 1.0;
  double mu = 1.0;
  int iterations = 400;
  double learning_rate = 2e-3;
  /// Piecewise-constant smoothness weight; each entry starts at its iteration.
  std::vector<LambdaStage> schedule;
  /// Stop once the relative loss decrease over `convergence_window`
  /// iterations of the last stage drops below this.
  double tolerance = 1e-9;
  int convergence_window = 20;
  /// Closest-point correspondences are recomputed every this many iterations.
  int correspondence_interval = 1;
  /// Correspondences farther than this multiple of the median are ignored.
  double outlier_factor = 3.0;
  LaplacianWeighting weighting = LaplacianWeighting::Uniform;
  /// Reset the optimizer moments whenever the smoothness weight changes.
  bool reset_per_stage = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// 100 -> 1 in four geometric steps over `iterations`.
  static DeformConfig defaults();
  static std::vector<LambdaStage> geometric_schedule(double from, double to, int stages,
                                                    int iterations);

  double lambda_at(int iteration) const;
  /// Throws ValidationError on negative weights or a non-positive rate.
  void validate() const;
};

void to_json(nlohmann::json& j, const DeformConfig& c);
/// Unknown keys are rejected.
void from_json(const nlohmann::json& j, DeformConfig& c);
DeformConfig load_deform_config(const std::filesystem::path& path);

/// Loss terms in the normalized frame (squared lengths in bbox-diagonal units).
struct LossBreakdown {
  double mesh = 0.0;
  double smooth = 0.0;
  double control = 0.0;
  double total = 0.0;
};

struct LossRecord {
  int iteration;
  double lambda;
  LossBreakdown loss;
};

struct DeformResult {
  TriMesh mesh;
  AffineField field;
  LossBreakdown initial;
  LossBreakdown final_loss;
  int iterations = 0;
  bool converged = false;
  /// Steps where the objective rose although correspondences were unchanged.
  int non_monotone_steps = 0;
  std::vector<LossRecord> trace;
};

/// The objective for one source mesh, target and control set. Closest-point
/// correspondences are held fixed between calls to `update_correspondences`.
class DeformProblem {
 public:
  /// `target` may be null for a controls-only problem (no mesh term).
  DeformProblem(const TriMesh& source, const SpatialIndex* target, const ControlPairs& controls,
                const DeformConfig& config);

  std::size_t vertex_count() const { return rest_.size(); }
  const Vec3& center() const { return center_; }
  double scale() const { return scale_; }

  /// Deformed vertices in the normalized frame.
  std::vector<Vec3> positions(const AffineField& field) const;
  /// Deformed vertices in millimeters.
  std::vector<Vec3> world_positions(const AffineField& field) const;

  void update_correspondences(const AffineField& field);
  /// Fixes correspondences explicitly (normalized frame) with unit weights.
  void set_correspondences(std::vector<Vec3> points, std::vector<double> weights);
  const std::vector<Vec3>& correspondences() const { return closest_; }

  /// Loss and, when `gradient` is non-null, its gradient in AffineField::flat order.
  LossBreakdown evaluate(const AffineField& field, double lambda,
                         std::vector<double>* gradient) const;

 private:
  struct ControlAnchor {
    Face face;
    Vec3 weights;
    Vec3 point;   // normalized source-side point
    Vec3 target;  // normalized target
  };

  std::vector<Vec3> source_;
  std::vector<Vec3> rest_;  // normalized source vertices
  Vec3 center_;
  double scale_;
  LaplacianOperator laplacian_;
  const SpatialIndex* target_;
  std::vector<ControlAnchor> controls_;
  std::vector<Vec3> closest_;
  std::vector<double> weights_;
  double mu_;
  double outlier_factor_;
};

/// Loss and gradient at `field`, with correspondences computed at `field`.
std::pair<LossBreakdown, std::vector<double>> loss_gradient(const TriMesh& source,
                                                            const SpatialIndex* target,
                                                            const ControlPairs& controls,
                                                            const AffineField& field,
                                                            const DeformConfig& config,
                                                            double lambda);

/// Non-rigid registration of `source` onto `target` (null: controls only).
/// Throws NumericalError if the loss becomes non-finite.
DeformResult deform(const TriMesh& source, const SpatialIndex* target,
                    const ControlPairs& controls, const DeformConfig& config,
                    const std::optional<AffineField>& initial = std::nullopt);

/// iteration,lambda,mesh,smooth,control,total
void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path);

}  // namespace cranio
