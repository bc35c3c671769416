// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace cranio {

enum class LaplacianWeighting { Uniform, Cotangent };

/// Row-normalized mesh Laplacian: (L u)_i = sum_j w_ij u_j / sum_j w_ij - u_i.
/// Every row sums to zero, so constant fields map to exactly zero. Isolated
/// vertices get an empty row.
class LaplacianOperator {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  LaplacianOperator(const TriMesh& mesh, LaplacianWeighting weighting = LaplacianWeighting::Uniform);

  const Matrix& matrix() const { return matrix_; }
  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }
  LaplacianWeighting weighting() const { return weighting_; }

  /// Throws ValidationError when field.size() != vertex count.
  std::vector<Vec3> apply(std::span<const Vec3> field) const;

 private:
  Matrix matrix_;
  LaplacianWeighting weighting_;
};

/// Smoothest field (least squared Laplacian) that takes `values` at the
/// `anchors` vertices, with the anchor misfit weighted by `anchor_weight`.
/// Components without anchors decay to zero through a tiny ridge term.
std::vector<Vec3> smooth_interpolate(const TriMesh& mesh, std::span<const int> anchors,
                                     std::span<const Vec3> values, double anchor_weight = 1e3,
                                     LaplacianWeighting weighting = LaplacianWeighting::Uniform);

}  // namespace cranio
