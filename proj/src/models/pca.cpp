// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/models/pca.hpp"

#include "cranio/error.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace cranio {

Pca fit_pca(const Eigen::MatrixXd& rows, int components) {
  if (rows.rows() < 2) throw ValidationError("PCA needs at least two samples");
  Pca out;
  out.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centred = rows.rowwise() - out.mean.transpose();
  if (centred.cols() == 0) return out;

  // Thin SVD on the short side: the sample count is tiny next to the dimension.
  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centred.transpose(), Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  out.total_variance = sv.squaredNorm();
  const double tol = sv.size() > 0 ? sv(0) * 1e-10 * static_cast<double>(rows.rows()) : 0.0;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol && sv(rank) > 0.0) ++rank;
  out.rank = rank;

  const int keep = components <= 0 ? rank : std::min(components, rank);
  out.basis = svd.matrixU().leftCols(keep);
  out.singular_values = sv.head(keep);
  for (int c = 0; c < keep; ++c) {
    Eigen::Index arg = 0;
    out.basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.basis(arg, c) < 0.0) out.basis.col(c) *= -1.0;
  }
  return out;
}

}  // namespace cranio
