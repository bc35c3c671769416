// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/deform/deform.hpp"

#include "cranio/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace cranio {

AffineField AffineField::identity(std::size_t n) {
  VertexAffine id = VertexAffine::Zero();
  id.leftCols<3>().setIdentity();
  return AffineField{std::vector<VertexAffine>(n, id)};
}

// ---------------------------------------------------------------------------
// Config

DeformConfig DeformConfig::defaults() {
  DeformConfig c;
  c.schedule = geometric_schedule(100.0, 1.0, 4, c.iterations);
  return c;
}

std::vector<LambdaStage> DeformConfig::geometric_schedule(double from, double to, int stages,
                                                          int iterations) {
  if (stages < 1) throw ValidationError("schedule needs at least one stage");
  std::vector<LambdaStage> out;
  for (int s = 0; s < stages; ++s) {
    const double f = stages == 1 ? 1.0 : static_cast<double>(s) / (stages - 1);
    const double lambda = stages == 1 ? to : from * std::pow(to / from, f);
    out.push_back({iterations * s / stages, lambda});
  }
  return out;
}

double DeformConfig::lambda_at(int iteration) const {
  if (schedule.empty()) return lambda;
  double value = schedule.front().lambda;
  for (const LambdaStage& s : schedule) {
    if (s.iteration <= iteration) value = s.lambda;
  }
  return value;
}

void DeformConfig::validate() const {
  if (!(lambda >= 0.0) || !(mu >= 0.0)) throw ValidationError("lambda and mu must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (iterations < 0) throw ValidationError("iteration count must be >= 0");
  if (correspondence_interval < 1) throw ValidationError("correspondence interval must be >= 1");
  if (convergence_window < 1) throw ValidationError("convergence window must be >= 1");
  for (const LambdaStage& s : schedule) {
    if (!(s.lambda >= 0.0)) throw ValidationError("scheduled lambda must be >= 0");
  }
}

void to_json(nlohmann::json& j, const DeformConfig& c) {
  nlohmann::json schedule = nlohmann::json::array();
  for (const LambdaStage& s : c.schedule) schedule.push_back({s.iteration, s.lambda});
  j = {{"lambda", c.lambda},
       {"mu", c.mu},
       {"iterations", c.iterations},
       {"learning_rate", c.learning_rate},
       {"schedule", schedule},
       {"tolerance", c.tolerance},
       {"convergence_window", c.convergence_window},
       {"correspondence_interval", c.correspondence_interval},
       {"outlier_factor", c.outlier_factor},
       {"weighting", c.weighting == LaplacianWeighting::Uniform ? "uniform" : "cotangent"},
       {"reset_per_stage", c.reset_per_stage},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"eps", c.eps}};
}

void from_json(const nlohmann::json& j, DeformConfig& c) {
  static const std::set<std::string> known = {
      "lambda",         "mu",        "iterations",        "learning_rate",
      "schedule",       "tolerance", "convergence_window", "correspondence_interval",
      "outlier_factor", "weighting", "reset_per_stage",    "beta1",
      "beta2",          "eps"};
  if (!j.is_object()) throw ValidationError("deform config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown deform config key '" + key + "'");
  }
  try {
    c.lambda = j.value("lambda", c.lambda);
    c.mu = j.value("mu", c.mu);
    c.iterations = j.value("iterations", c.iterations);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.convergence_window = j.value("convergence_window", c.convergence_window);
    c.correspondence_interval = j.value("correspondence_interval", c.correspondence_interval);
    c.outlier_factor = j.value("outlier_factor", c.outlier_factor);
    c.reset_per_stage = j.value("reset_per_stage", c.reset_per_stage);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    if (j.contains("weighting")) {
      const auto w = j.at("weighting").get<std::string>();
      if (w == "uniform") {
        c.weighting = LaplacianWeighting::Uniform;
      } else if (w == "cotangent") {
        c.weighting = LaplacianWeighting::Cotangent;
      } else {
        throw ValidationError("weighting must be 'uniform' or 'cotangent'");
      }
    }
    if (j.contains("schedule")) {
      c.schedule.clear();
      for (const auto& s : j.at("schedule")) {
        c.schedule.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad deform config: ") + e.what());
  }
  c.validate();
}

DeformConfig load_deform_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, false, e.what());
  }
  DeformConfig c;
  from_json(j, c);
  return c;
}

// ---------------------------------------------------------------------------
// Objective

DeformProblem::DeformProblem(const TriMesh& source, const SpatialIndex* target,
                             const ControlPairs& controls, const DeformConfig& config)
    : center_(source.centroid()),
      scale_(source.bbox_diagonal()),
      laplacian_(source, config.weighting),
      target_(target),
      mu_(config.mu),
      outlier_factor_(config.outlier_factor) {
  source.validate();
  if (source.empty()) throw ValidationError("deform source mesh is empty");
  if (!(scale_ > 0.0)) throw ValidationError("deform source has a degenerate bounding box");
  if (target_ && target_->mesh().empty()) throw ValidationError("deform target mesh is empty");
  if (controls.source.size() != controls.target.size()) {
    throw ValidationError("control sets differ in length");
  }
  source_ = source.vertices;
  rest_.reserve(source.vertices.size());
  for (const Vec3& v : source.vertices) rest_.push_back((v - center_) / scale_);

  if (!controls.source.empty()) {
    const SpatialIndex source_index(source);
    const double limit = 0.05 * scale_;
    controls_.reserve(controls.size());
    for (std::size_t k = 0; k < controls.size(); ++k) {
      const ClosestPoint cp = source_index.closest_point(controls.source[k]);
      if (std::sqrt(cp.squared_distance) > limit) {
        throw ValidationError("control point " + std::to_string(k) + " lies " +
                              std::to_string(std::sqrt(cp.squared_distance)) +
                              " mm from the source mesh (limit " + std::to_string(limit) + ")");
      }
      controls_.push_back({source.faces[cp.face], cp.barycentric,
                           (controls.source[k] - center_) / scale_,
                           (controls.target[k] - center_) / scale_});
    }
  }
}

std::vector<Vec3> DeformProblem::positions(const AffineField& field) const {
  std::vector<Vec3> x(rest_.size());
  for (std::size_t i = 0; i < rest_.size(); ++i) {
    const VertexAffine& t = field.transforms[i];
    x[i] = t.leftCols<3>() * rest_[i] + t.col(3);
  }
  return x;
}

std::vector<Vec3> DeformProblem::world_positions(const AffineField& field) const {
  // Source vertex plus scaled displacement, so the identity field is exact.
  std::vector<Vec3> x = positions(field);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = source_[i] + (x[i] - rest_[i]) * scale_;
  return x;
}

void DeformProblem::update_correspondences(const AffineField& field) {
  if (!target_) return;
  const std::vector<Vec3> x = positions(field);
  const std::vector<Vec3> world = world_positions(field);
  const std::size_t n = x.size();
  closest_.resize(n);
  weights_.assign(n, 1.0);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ClosestPoint cp = target_->closest_point(world[i]);
    closest_[i] = (cp.point - center_) / scale_;
    dist[i] = (closest_[i] - x[i]).norm();
  }
  if (outlier_factor_ > 0.0) {
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double cutoff = outlier_factor_ * sorted[n / 2];
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i] > cutoff) weights_[i] = 0.0;
    }
  }
}

void DeformProblem::set_correspondences(std::vector<Vec3> points, std::vector<double> weights) {
  if (points.size() != rest_.size() || weights.size() != rest_.size()) {
    throw ValidationError("correspondence count does not match the source");
  }
  closest_ = std::move(points);
  weights_ = std::move(weights);
}

LossBreakdown DeformProblem::evaluate(const AffineField& field, double lambda,
                                      std::vector<double>* gradient) const {
  const std::size_t n = rest_.size();
  if (field.size() != n) throw ValidationError("affine field size does not match the source");
  const std::vector<Vec3> x = positions(field);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<Vec3> gx(n, Vec3::Zero());
  if (gradient) gradient->assign(n * 12, 0.0);
  LossBreakdown loss;

  if (target_) {
    if (closest_.size() != n) throw ValidationError("correspondences not computed");
    for (std::size_t i = 0; i < n; ++i) {
      if (weights_[i] == 0.0) continue;
      const Vec3 r = x[i] - closest_[i];
      loss.mesh += weights_[i] * r.squaredNorm();
      gx[i] += 2.0 * inv_n * weights_[i] * r;
    }
    loss.mesh *= inv_n;
  }

  std::vector<Vec3> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = x[i] - rest_[i];
  const std::vector<Vec3> lu = laplacian_.apply(u);
  for (const Vec3& l : lu) loss.smooth += l.squaredNorm();
  loss.smooth *= inv_n;
  if (gradient && lambda != 0.0) {
    const PointMatrix back = laplacian_.matrix().transpose() * as_matrix(lu);
    for (std::size_t i = 0; i < n; ++i) gx[i] += 2.0 * lambda * inv_n * back.row(i).transpose();
  }

  if (!controls_.empty()) {
    const double inv_k = 1.0 / static_cast<double>(controls_.size());
    std::vector<std::pair<Vec3, const ControlAnchor*>> residuals;
    for (const ControlAnchor& c : controls_) {
      Vec3 tp = Vec3::Zero();
      for (int k = 0; k < 3; ++k) {
        const VertexAffine& t = field.transforms[c.face[k]];
        tp += c.weights[k] * (t.leftCols<3>() * c.point + t.col(3));
      }
      const Vec3 r = tp - c.target;
      loss.control += r.squaredNorm();
      if (gradient && mu_ != 0.0) residuals.emplace_back(2.0 * mu_ * inv_k * r, &c);
    }
    loss.control *= inv_k;
    if (gradient) {
      for (const auto& [g, c] : residuals) {
        for (int k = 0; k < 3; ++k) {
          Eigen::Map<VertexAffine> ga(gradient->data() + 12 * c->face[k]);
          ga.leftCols<3>() += c->weights[k] * g * c->point.transpose();
          ga.col(3) += c->weights[k] * g;
        }
      }
    }
  }

  loss.total = loss.mesh + lambda * loss.smooth + mu_ * loss.control;
  if (gradient) {
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Map<VertexAffine> ga(gradient->data() + 12 * i);
      ga.leftCols<3>() += gx[i] * rest_[i].transpose();
      ga.col(3) += gx[i];
    }
  }
  return loss;
}

std::pair<LossBreakdown, std::vector<double>> loss_gradient(const TriMesh& source,
                                                            const SpatialIndex* target,
                                                            const ControlPairs& controls,
                                                            const AffineField& field,
                                                            const DeformConfig& config,
                                                            double lambda) {
  DeformProblem problem(source, target, controls, config);
  problem.update_correspondences(field);
  std::vector<double> grad;
  const LossBreakdown loss = problem.evaluate(field, lambda, &grad);
  return {loss, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Driver

namespace {

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.mesh) && std::isfinite(l.smooth) && std::isfinite(l.control) &&
         std::isfinite(l.total);
}

[[noreturn]] void abort_non_finite(int iteration, double lambda, const LossBreakdown& l,
                                   const AffineField& field) {
  std::ostringstream msg;
  msg << "deform: non-finite loss at iteration " << iteration << " (lambda " << lambda
      << ", mesh " << l.mesh << ", smooth " << l.smooth << ", control " << l.control << ")";
  const auto flat = field.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (!std::isfinite(flat[i])) {
      msg << "; first non-finite parameter at vertex " << i / 12 << " slot " << i % 12;
      break;
    }
  }
  throw NumericalError(msg.str());
}

bool last_stage(const DeformConfig& c, int iteration) {
  for (const LambdaStage& s : c.schedule) {
    if (s.iteration > iteration) return false;
  }
  return true;
}

}  // namespace

DeformResult deform(const TriMesh& source, const SpatialIndex* target,
                    const ControlPairs& controls, const DeformConfig& config,
                    const std::optional<AffineField>& initial) {
  config.validate();
  DeformProblem problem(source, target, controls, config);
  AffineField field = initial ? *initial : AffineField::identity(source.vertices.size());
  if (field.size() != source.vertices.size()) {
    throw ValidationError("initial affine field size does not match the source");
  }

  AmsGradState state(field.size() * 12);
  state.beta1 = config.beta1;
  state.beta2 = config.beta2;
  state.eps = config.eps;

  DeformResult result;
  std::vector<double> grad;
  double prev_lambda = std::numeric_limits<double>::quiet_NaN();
  double prev_total = std::numeric_limits<double>::infinity();
  int stage_start = 0;
  int it = 0;
  for (; it < config.iterations; ++it) {
    const double lambda = config.lambda_at(it);
    const bool new_stage = lambda != prev_lambda;
    if (new_stage) {
      if (config.reset_per_stage) state.reset(state.size());
      stage_start = it;
    }
    bool refreshed = false;
    if (target && it % config.correspondence_interval == 0) {
      problem.update_correspondences(field);
      refreshed = true;
    }
    const LossBreakdown loss = problem.evaluate(field, lambda, &grad);
    if (!finite(loss)) abort_non_finite(it, lambda, loss, field);
    if (it == 0) result.initial = loss;
    if (!refreshed && !new_stage && loss.total > prev_total * (1.0 + 1e-12)) {
      ++result.non_monotone_steps;
    }
    result.trace.push_back({it, lambda, loss});
    prev_total = loss.total;
    prev_lambda = lambda;

    if (last_stage(config, it) && it - stage_start >= config.convergence_window) {
      const double old = result.trace[it - config.convergence_window].loss.total;
      const double rel = (old - loss.total) / old;
      if (old <= std::numeric_limits<double>::min() || (rel >= 0.0 && rel < config.tolerance)) {
        result.converged = true;
        break;
      }
    }
    amsgrad_step(state, grad, field.flat(), config.learning_rate);
  }

  const double lambda = config.lambda_at(std::max(it - 1, 0));
  problem.update_correspondences(field);
  result.final_loss = problem.evaluate(field, lambda, nullptr);
  if (!finite(result.final_loss)) abort_non_finite(it, lambda, result.final_loss, field);
  result.iterations = it;
  result.mesh.vertices = problem.world_positions(field);
  result.mesh.faces = source.faces;
  result.mesh.albedo = source.albedo;
  result.field = std::move(field);
  return result;
}

void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,lambda,mesh,smooth,control,total\n";
  out.precision(17);
  for (const LossRecord& r : trace) {
    out << r.iteration << ',' << r.lambda << ',' << r.loss.mesh << ',' << r.loss.smooth << ','
        << r.loss.control << ',' << r.loss.total << '\n';
  }
}

}  // namespace cranio
