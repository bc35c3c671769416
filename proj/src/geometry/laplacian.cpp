// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/geometry/laplacian.hpp"

#include "cranio/error.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <map>
#include <string>

namespace cranio {

namespace {

double cotangent(const Vec3& apex, const Vec3& p, const Vec3& q) {
  const Vec3 u = p - apex;
  const Vec3 v = q - apex;
  const double s = u.cross(v).norm();
  return s > 0.0 ? u.dot(v) / s : 0.0;
}

}  // namespace

LaplacianOperator::LaplacianOperator(const TriMesh& mesh, LaplacianWeighting weighting)
    : weighting_(weighting) {
  const int n = static_cast<int>(mesh.vertices.size());
  std::vector<std::map<int, double>> weights(n);
  if (weighting == LaplacianWeighting::Uniform) {
    const auto adj = vertex_adjacency(mesh);
    for (int i = 0; i < n; ++i) {
      for (int j : adj[i]) weights[i][j] = 1.0;
    }
  } else {
    for (const Face& f : mesh.faces) {
      for (int k = 0; k < 3; ++k) {
        const int i = f[k];
        const int j = f[(k + 1) % 3];
        const int apex = f[(k + 2) % 3];
        const double w = 0.5 * cotangent(mesh.vertices[apex], mesh.vertices[i], mesh.vertices[j]);
        weights[i][j] += w;
        weights[j][i] += w;
      }
    }
    // Obtuse triangles can drive a weight negative; clamp so the
    // normalization below stays well defined.
    for (auto& row : weights) {
      for (auto& [j, w] : row) w = std::max(w, 1e-8);
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (const auto& [j, w] : weights[i]) total += w;
    if (total <= 0.0) continue;
    double diagonal = 0.0;
    for (const auto& [j, w] : weights[i]) {
      triplets.emplace_back(i, j, w / total);
      diagonal -= w / total;
    }
    triplets.emplace_back(i, i, diagonal);
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
}

std::vector<Vec3> LaplacianOperator::apply(std::span<const Vec3> field) const {
  if (field.size() != size()) {
    throw ValidationError("laplacian_apply: field has " + std::to_string(field.size()) +
                          " entries, operator expects " + std::to_string(size()));
  }
  // Summing w_ij (u_j - u_i) keeps constant fields exactly at zero.
  std::vector<Vec3> out(field.size(), Vec3::Zero());
  for (Eigen::Index i = 0; i < matrix_.outerSize(); ++i) {
    Vec3 acc = Vec3::Zero();
    for (Matrix::InnerIterator it(matrix_, i); it; ++it) {
      if (it.col() == i) continue;
      acc += it.value() * (field[it.col()] - field[i]);
    }
    out[i] = acc;
  }
  return out;
}

std::vector<Vec3> smooth_interpolate(const TriMesh& mesh, std::span<const int> anchors,
                                     std::span<const Vec3> values, double anchor_weight,
                                     LaplacianWeighting weighting) {
  if (anchors.size() != values.size()) throw ValidationError("anchors and values differ in length");
  if (anchors.empty()) throw ValidationError("smooth_interpolate needs at least one anchor");
  if (!(anchor_weight > 0.0)) throw ValidationError("anchor weight must be positive");
  const auto n = static_cast<Eigen::Index>(mesh.vertices.size());
  const LaplacianOperator lap(mesh, weighting);
  const Eigen::SparseMatrix<double> l = lap.matrix();
  Eigen::SparseMatrix<double> a = l.transpose() * l;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const int v = anchors[k];
    if (v < 0 || v >= n) throw ValidationError("anchor vertex out of range");
    a.coeffRef(v, v) += anchor_weight;
    rhs.row(v) += anchor_weight * values[k].transpose();
  }
  for (Eigen::Index i = 0; i < n; ++i) a.coeffRef(i, i) += 1e-10;
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("smooth_interpolate: factorization failed");
  const Eigen::MatrixXd u = solver.solve(rhs);
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[i] = u.row(i).transpose();
  return out;
}

}  // namespace cranio
