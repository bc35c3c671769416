// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace cranio {

/// Mean-centred PCA of row samples.
struct Pca {
  Eigen::VectorXd mean;
  /// Unit-length principal directions, one per column.
  Eigen::MatrixXd basis;
  Eigen::VectorXd singular_values;
  /// Sum of squared singular values over all components, kept or not.
  double total_variance = 0.0;
  /// Numerical rank of the centred data.
  int rank = 0;
};

/// `components` <= 0 keeps the full rank; larger requests are clamped to it.
/// Each column's largest-magnitude entry is made positive.
Pca fit_pca(const Eigen::MatrixXd& rows, int components);

}  // namespace cranio
