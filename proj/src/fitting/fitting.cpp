// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/fitting/fitting.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/laplacian.hpp"
#include "cranio/pipeline/procrustes.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cranio {

// ---------------------------------------------------------------------------
// Face from transported points

PhiFitTargets phi_fit_targets(std::span<const Vec3> points, std::span<const std::uint8_t> mask,
                              int n_q) {
  if (n_q < 1) throw ValidationError("n_q must be positive");
  if (points.size() != mask.size() || points.size() % static_cast<std::size_t>(n_q) != 0) {
    throw ValidationError("point set and mask do not form whole rays per vertex");
  }
  const std::size_t n = points.size() / static_cast<std::size_t>(n_q);
  PhiFitTargets out;
  out.target.assign(n, Vec3::Zero());
  out.has.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    int count = 0;
    for (int k = 0; k < n_q; ++k) {
      const std::size_t e = j * static_cast<std::size_t>(n_q) + static_cast<std::size_t>(k);
      if (!mask[e]) continue;
      ++count;
      // Running mean keeps repeated points exact.
      out.target[j] += (points[e] - out.target[j]) / count;
    }
    out.has[j] = count > 0 ? 1 : 0;
  }
  return out;
}

PhiFitResult phi_fit(std::span<const Vec3> points, std::span<const std::uint8_t> mask, int n_q,
                     const TriMesh& face, const PhiFitOptions& options) {
  if (!(options.lambda > 0.0) || !(options.mu > 0.0)) {
    throw ValidationError("phi_fit needs positive smoothness and control weights");
  }
  const PhiFitTargets t = phi_fit_targets(points, mask, n_q);
  if (t.target.size() != face.vertices.size()) {
    throw ValidationError("point set does not match the face vertex count");
  }
  std::vector<int> anchors;
  std::vector<Vec3> shifts;
  for (std::size_t j = 0; j < t.target.size(); ++j) {
    if (!t.has[j]) continue;
    anchors.push_back(static_cast<int>(j));
    shifts.push_back(t.target[j] - face.vertices[j]);
  }
  const double n = static_cast<double>(face.vertices.size());
  const double coverage = static_cast<double>(anchors.size()) / n;
  if (anchors.empty() || coverage < options.min_coverage) {
    throw ValidationError("only " + std::to_string(anchors.size()) + " of " +
                          std::to_string(face.vertices.size()) +
                          " face vertices have a valid transported point");
  }
  // Same balance as the deformation objective: lambda/N vs mu/K.
  const double k = static_cast<double>(anchors.size());
  const double weight = (options.mu / k) / (options.lambda / n);
  const std::vector<Vec3> u = smooth_interpolate(face, anchors, shifts, weight);

  PhiFitResult out;
  out.mesh = face;
  for (std::size_t i = 0; i < u.size(); ++i) out.mesh.vertices[i] += u[i];
  out.controlled = anchors.size();
  for (int a : anchors) out.control_residual += (out.mesh.vertices[a] - t.target[a]).norm();
  out.control_residual /= k;
  return out;
}

// ---------------------------------------------------------------------------
// Tissue coefficients

namespace {

std::vector<std::size_t> shared_rays(const TmmModel& model, std::span<const std::uint8_t> mask) {
  if (mask.size() != model.rays()) {
    throw ValidationError("tissue field has " + std::to_string(mask.size()) +
                          " rays, model expects " + std::to_string(model.rays()));
  }
  std::vector<std::size_t> rays;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r] && model.valid[r]) rays.push_back(r);
  }
  return rays;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rays) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(3 * rays.size()), m.cols());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    out.middleRows<3>(static_cast<Eigen::Index>(3 * i)) =
        m.middleRows<3>(static_cast<Eigen::Index>(3 * rays[i]));
  }
  return out;
}

double largest_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.rows() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

double default_ridge(const TmmModel& model, std::span<const std::uint8_t> mask) {
  const Eigen::MatrixXd b = rows_of(model.basis, shared_rays(model, mask));
  return 1e-4 * largest_eigenvalue(b.transpose() * b);
}

TissueFit fit_tissue(const TissueField& observed, const TmmModel& model, double ridge) {
  const std::vector<std::size_t> rays = shared_rays(model, observed.mask);
  const std::size_t model_valid = model.valid_count();
  if (model_valid == 0 || 2 * rays.size() < model_valid) {
    throw ValidationError("observed thickness covers only " + std::to_string(rays.size()) + " of " +
                          std::to_string(model_valid) + " model rays");
  }
  if (ridge < 0.0) ridge = default_ridge(model, observed.mask);

  const auto m = static_cast<Eigen::Index>(3 * rays.size());
  Eigen::VectorXd y(m);
  Eigen::VectorXd mean(m);
  for (std::size_t i = 0; i < rays.size(); ++i) {
    y.segment<3>(static_cast<Eigen::Index>(3 * i)) = observed.vectors[rays[i]];
    mean.segment<3>(static_cast<Eigen::Index>(3 * i)) =
        model.mean.segment<3>(static_cast<Eigen::Index>(3 * rays[i]));
  }
  const Eigen::MatrixXd b = rows_of(model.basis, rays);
  const Eigen::Index n = b.cols();
  if (!y.allFinite()) throw ValidationError("observed thickness has non-finite entries");

  TissueFit fit;
  fit.entries = rays.size();
  const double mm = mean.squaredNorm();
  if (!(mm > 0.0)) throw NumericalError("tissue model mean vanishes on the observed rays");
  const double s0 = mean.dot(y) / mm;
  fit.baseline_residual = (s0 * mean - y).squaredNorm();

  auto objective = [&](const Eigen::VectorXd& beta, double s) {
    return ((mean + b * beta) * s - y).squaredNorm() + ridge * beta.squaredNorm();
  };

  // Start from the joint linear fit y ~ s*mean + B*gamma, beta = gamma / s.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  double s = s0;
  {
    Eigen::MatrixXd a(m, n + 1);
    a.col(0) = mean;
    a.rightCols(n) = b;
    Eigen::MatrixXd normal = a.transpose() * a;
    normal.bottomRightCorner(n, n).diagonal().array() += ridge;
    const Eigen::VectorXd x = normal.ldlt().solve(a.transpose() * y);
    if (x.allFinite() && x(0) > 0.0) {
      s = x(0);
      beta = x.tail(n) / s;
    }
  }
  if (!(s > 0.0)) {
    throw NumericalError("observed thickness is anti-correlated with the model mean");
  }

  const Eigen::MatrixXd btb = b.transpose() * b;
  // Below this the objective is rounding noise and its relative change is meaningless.
  const double floor = 1e-24 * y.squaredNorm();
  double prev = objective(beta, s);
  int it = 0;
  for (; it < 100; ++it) {
    // Coefficients given the scale: ridge regression.
    Eigen::MatrixXd normal = s * s * btb;
    normal.diagonal().array() += ridge;
    if (n > 0) beta = normal.ldlt().solve(s * b.transpose() * (y - s * mean));
    // Scale given the coefficients: 1-D least squares.
    const Eigen::VectorXd z = mean + b * beta;
    const double zz = z.squaredNorm();
    if (!(zz > 0.0)) throw NumericalError("tissue synthesis vanished during fitting");
    s = z.dot(y) / zz;
    if (!(s > 0.0)) throw NumericalError("tissue scale became non-positive during fitting");
    const double cur = objective(beta, s);
    const double change = std::abs(prev - cur) / std::max(prev, 1e-300);
    prev = cur;
    if (change < 1e-10 || cur <= floor) break;
  }
  if (it == 100) throw NumericalError("tissue fit did not converge in 100 alternations");
  fit.iterations = it + 1;

  if (prev > fit.baseline_residual) {
    beta.setZero();
    s = s0;
  }
  fit.coeffs.ti = beta;
  fit.coeffs.scale = s;
  fit.residual = ((mean + b * beta) * s - y).squaredNorm();
  return fit;
}

// ---------------------------------------------------------------------------
// Model fitting to a mesh or point cloud

namespace {

struct Subset {
  std::size_t first = 0;
  std::size_t count = 0;
};

Subset subset_of(const FsmmModel& model, FitTarget which) {
  switch (which) {
    case FitTarget::Face:
      return {0, model.face_vertices};
    case FitTarget::Skull:
      return {model.face_vertices, model.skull_vertices};
    case FitTarget::Both:
      break;
  }
  return {0, model.vertices()};
}

// With `indexed` set the target shares the fitted topology: vertex i pairs
// with target[i] until that converges, then closest points take over.
template <typename ClosestFn>
FsmmFit fit_fsmm(const FsmmModel& model, const FsmmFitConfig& cfg, std::span<const Vec3> target,
                 ClosestFn closest, bool indexed = false) {
  if (target.empty()) throw ValidationError("fit target is empty");
  if (cfg.max_iterations < 1 || !(cfg.tolerance > 0.0) || !(cfg.damping >= 0.0)) {
    throw ValidationError("invalid model-fit configuration");
  }
  const Subset sub = subset_of(model, cfg.which);
  const int used = cfg.components <= 0 ? model.n_id() : std::min(cfg.components, model.n_id());
  const auto rows = static_cast<Eigen::Index>(3 * sub.count);
  const auto first = static_cast<Eigen::Index>(3 * sub.first);
  const Eigen::MatrixXd b = model.basis.block(first, 0, rows, used);
  const Eigen::VectorXd mean = model.mean.segment(first, rows);

  const Eigen::MatrixXd btb = b.transpose() * b;
  const double damping = cfg.damping * std::max(largest_eigenvalue(btb), 1e-300);
  Eigen::MatrixXd plain = btb;
  plain.diagonal().array() += damping;
  const Eigen::LDLT<Eigen::MatrixXd> plain_solver(plain);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(used);
  std::vector<Vec3> shape(sub.count);
  auto update_shape = [&] {
    const Eigen::VectorXd v = mean + b * beta;
    for (std::size_t i = 0; i < sub.count; ++i) shape[i] = v.segment<3>(static_cast<Eigen::Index>(3 * i));
  };
  update_shape();

  Similarity pose;
  if (indexed && target.size() != sub.count) throw ValidationError("indexed fit needs one target per vertex");
  if (target.size() == sub.count) {
    pose = fit_similarity(shape, target, false);
  } else {
    Vec3 ct = Vec3::Zero();
    Vec3 cs = Vec3::Zero();
    for (const Vec3& p : target) ct += p;
    for (const Vec3& p : shape) cs += p;
    pose.translation = ct / static_cast<double>(target.size()) - cs / static_cast<double>(shape.size());
  }

  double extent = 0.0;
  for (const Vec3& p : shape) extent = std::max(extent, (p - shape.front()).norm());

  FsmmFit fit;
  std::vector<Vec3> corr(sub.count);
  double prev = std::numeric_limits<double>::infinity();
  int rising = 0;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    double sq = 0.0;
    for (std::size_t i = 0; i < sub.count; ++i) {
      const Vec3 x = pose.apply(shape[i]);
      corr[i] = indexed ? target[i] : closest(x);
      sq += (x - corr[i]).squaredNorm();
    }
    const double rmse = std::sqrt(sq / static_cast<double>(sub.count));
    fit.rmse_history.push_back(rmse);
    const bool settled = rmse <= 1e-12 * std::max(extent, 1.0) ||
                         (std::isfinite(prev) && std::abs(prev - rmse) <= cfg.tolerance * prev);
    if (settled && indexed) {
      indexed = false;
      prev = std::numeric_limits<double>::infinity();
      rising = 0;
      continue;
    }
    if (settled) break;
    rising = rmse > prev ? rising + 1 : 0;
    if (rising >= 5) {
      throw NumericalError("model fit diverged: RMSE rose for 5 consecutive iterations");
    }
    prev = rmse;

    pose = fit_similarity(shape, corr, false);
    if (used > 0 && !indexed) {
      Eigen::VectorXd r(rows);
      const Mat3 rt = pose.rotation.transpose();
      for (std::size_t i = 0; i < sub.count; ++i) {
        r.segment<3>(static_cast<Eigen::Index>(3 * i)) = rt * (corr[i] - pose.translation) - shape[i];
      }
      beta += plain_solver.solve(b.transpose() * r);
      update_shape();
    } else if (used > 0) {
      // With fixed pairs, solve the shape step jointly with a small rigid
      // motion about the centroid and keep only the shape part; the next
      // Procrustes step takes up the motion. Plain alternation crawls when
      // modes look rigid.
      Vec3 c = Vec3::Zero();
      for (const Vec3& p : shape) c += p;
      c /= static_cast<double>(sub.count);
      Eigen::MatrixXd g(rows, 6);
      Eigen::VectorXd r(rows);
      const Mat3 rt = pose.rotation.transpose();
      for (std::size_t i = 0; i < sub.count; ++i) {
        const auto o = static_cast<Eigen::Index>(3 * i);
        const Vec3 d = shape[i] - c;
        g.block<3, 3>(o, 0) << 0, d.z(), -d.y(), -d.z(), 0, d.x(), d.y(), -d.x(), 0;
        g.block<3, 3>(o, 3).setIdentity();
        r.segment<3>(o) = rt * (corr[i] - pose.translation) - shape[i];
      }
      const Eigen::MatrixXd btg = b.transpose() * g;
      Eigen::MatrixXd normal(used + 6, used + 6);
      normal.topLeftCorner(used, used) = btb;
      normal.topLeftCorner(used, used).diagonal().array() += damping;
      normal.topRightCorner(used, 6) = btg;
      normal.bottomLeftCorner(6, used) = btg.transpose();
      normal.bottomRightCorner(6, 6) = g.transpose() * g;
      Eigen::VectorXd rhs(used + 6);
      rhs.head(used) = b.transpose() * r;
      rhs.tail(6) = g.transpose() * r;
      beta += Eigen::LDLT<Eigen::MatrixXd>(normal).solve(rhs).head(used);
      update_shape();
    }
  }
  fit.iterations = it;
  fit.rmse = fit.rmse_history.back();
  fit.coeffs = FsmmCoefficients::zero(model);
  fit.coeffs.id.head(used) = beta;
  fit.coeffs.angles = angles_xyz(pose.rotation);
  for (int k = 0; k < 3; ++k) {
    if (fit.coeffs.angles[k] <= -std::numbers::pi) fit.coeffs.angles[k] = std::numbers::pi;
  }
  fit.coeffs.translation = pose.translation;
  return fit;
}

}  // namespace

FsmmFit fit_fsmm_to_mesh(const TriMesh& target, const FsmmModel& model, const FsmmFitConfig& cfg) {
  if (target.faces.empty()) return fit_fsmm_to_points(target.vertices, model, cfg);
  const SpatialIndex index(target);
  const std::vector<Face>* faces = cfg.which == FitTarget::Face    ? &model.face_faces
                                   : cfg.which == FitTarget::Skull ? &model.skull_faces
                                                                   : nullptr;
  const bool indexed = faces && target.faces == *faces;
  return fit_fsmm(model, cfg, target.vertices,
                  [&](const Vec3& x) { return index.closest_point(x).point; }, indexed);
}

FsmmFit fit_fsmm_to_points(std::span<const Vec3> target, const FsmmModel& model,
                           const FsmmFitConfig& cfg) {
  if (target.empty()) throw ValidationError("fit target is empty");
  const std::vector<Vec3> points(target.begin(), target.end());
  const PointIndex index(points);
  return fit_fsmm(model, cfg, target,
                  [&](const Vec3& x) { return points[index.nearest(x).index]; });
}

// ---------------------------------------------------------------------------
// Surgery

void SurgeryPlan::validate() const {
  if (!skull_plan.same_topology(skull_before)) {
    throw ValidationError("planned skull does not share the preoperative skull topology");
  }
}

SurgeryPlan make_surgery_plan(const TriMesh& skull_before, const RegionLabels& regions,
                              const std::map<std::string, Affine34>& transforms, double band_mm) {
  if (regions.vertex_region.size() != skull_before.vertices.size()) {
    throw ValidationError("region labels do not cover the skull");
  }
  RegionEditor editor(skull_before.vertices, regions, band_mm);
  editor.set_transforms(transforms);
  SurgeryPlan plan;
  plan.skull_before = skull_before;
  plan.skull_plan = skull_before;
  plan.skull_plan.vertices = editor.apply();
  plan.transforms = transforms;
  return plan;
}

SurgeryTransport prepare_transport(const TriMesh& face_before, const TriMesh& skull_before,
                                   const LandmarkSet& face_landmarks, int n_q) {
  face_landmarks.validate(face_before.vertices.size());
  const std::vector<Vec3> q = psi_map(face_before, face_landmarks, n_q);
  const RayBundle rays = build_skull_rays(face_before, q, 1);
  SurgeryTransport t;
  t.n_q = n_q;
  t.hits = psi_hit(rays, SpatialIndex(skull_before));
  t.valid_fraction = static_cast<double>(t.hits.valid_count()) / static_cast<double>(t.hits.size());
  if (t.valid_fraction < 0.5) {
    throw ValidationError("only " + std::to_string(t.hits.valid_count()) + " of " +
                          std::to_string(t.hits.size()) + " rays hit the preoperative skull");
  }
  t.anchors = build_index_map(skull_before, t.hits, rays.origins);
  return t;
}

PredictionResult predict_surgery(const TriMesh& face_before, const TriMesh& skull_before,
                                 const TriMesh& skull_plan, const SurgeryTransport& transport,
                                 const TmmModel* tmm, const PredictOptions& options) {
  if (!skull_plan.same_topology(skull_before)) {
    throw ValidationError("planned skull does not share the preoperative skull topology");
  }
  if (transport.n_q != options.n_q) throw ValidationError("transport n_q differs from the prediction");
  const HitSet& hits = transport.hits;
  if (hits.size() != face_before.vertices.size() * static_cast<std::size_t>(options.n_q)) {
    throw ValidationError("transport rays do not match the face");
  }

  PredictionResult out;
  TissueField thickness = tissue_field(hits);
  if (options.regularize_tissue) {
    if (!tmm) throw ValidationError("tissue regularization needs a tissue model");
    if (tmm->n_q != options.n_q) throw ValidationError("tissue model n_q differs from the prediction");
    const TissueFit fit = fit_tissue(thickness, *tmm, options.ridge);
    const TissueField model = sample_tmm(*tmm, fit.coeffs);
    std::size_t replaced = 0;
    for (std::size_t r = 0; r < thickness.size(); ++r) {
      if (thickness.mask[r] && model.mask[r]) {
        thickness.vectors[r] = model.vectors[r];
        ++replaced;
      }
    }
    out.tissue = fit.coeffs;
    out.diagnostics["tissue_residual"] = fit.residual;
    out.diagnostics["tissue_rays_replaced"] = replaced;
  }

  std::vector<Vec3> points(hits.size(), Vec3::Zero());
  for (std::size_t r = 0; r < hits.size(); ++r) {
    if (!hits.valid(r)) continue;
    const int a = transport.anchors.index[r];
    Vec3 base = skull_plan.vertices[a];
    if (options.anchor_offset) base += hits.point(r) - skull_before.vertices[a];
    points[r] = base + thickness.vectors[r];
  }
  const PhiFitResult fit = phi_fit(points, hits.mask, options.n_q, face_before, options.fit);
  out.face = fit.mesh;
  out.displacement.resize(face_before.vertices.size());
  for (std::size_t i = 0; i < out.displacement.size(); ++i) {
    out.displacement[i] = (out.face.vertices[i] - face_before.vertices[i]).norm();
  }
  out.diagnostics["valid_ray_fraction"] = transport.valid_fraction;
  out.diagnostics["controlled_vertices"] = fit.controlled;
  out.diagnostics["control_residual_mm"] = fit.control_residual;
  out.diagnostics["regularized_tissue"] = options.regularize_tissue;
  out.diagnostics["anchor_offset"] = options.anchor_offset;
  return out;
}

PredictionResult predict_surgery(const TriMesh& face_before, const TriMesh& skull_before,
                                 const TriMesh& skull_plan, const LandmarkSet& face_landmarks,
                                 const TmmModel* tmm, const PredictOptions& options) {
  if (!skull_plan.same_topology(skull_before)) {
    throw ValidationError("planned skull does not share the preoperative skull topology");
  }
  const SurgeryTransport t = prepare_transport(face_before, skull_before, face_landmarks, options.n_q);
  return predict_surgery(face_before, skull_before, skull_plan, t, tmm, options);
}

MorphFrame interpolate_morph(const TriMesh& source, const TriMesh& target, double t) {
  if (!source.same_topology(target)) throw ValidationError("morph endpoints differ in topology");
  if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("morph parameter must lie in [0, 1]");
  MorphFrame f;
  f.t = t;
  f.mesh = source;
  f.displacement.resize(source.vertices.size());
  for (std::size_t i = 0; i < source.vertices.size(); ++i) {
    f.mesh.vertices[i] = (1.0 - t) * source.vertices[i] + t * target.vertices[i];
    f.displacement[i] = t * (target.vertices[i] - source.vertices[i]).norm();
  }
  return f;
}

}  // namespace cranio
