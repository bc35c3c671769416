// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/error.hpp"
#include "cranio/fitting/fitting.hpp"
#include "cranio/pipeline/registration.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace cranio {
namespace {

using testing::icosphere;

TEST(PhiFitTargets, RunningMeanIsExactForRepeatedPoints) {
  const Vec3 p(0.1, 1.0 / 3.0, 123.456789);
  const std::vector<Vec3> pts{p, p, p, Vec3(1, 1, 1), Vec3(3, 5, 7), Vec3(9, 9, 9)};
  const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0};
  const PhiFitTargets t = phi_fit_targets(pts, mask, 3);
  ASSERT_EQ(t.target.size(), 2u);
  EXPECT_EQ(t.target[0], p);
  EXPECT_EQ(t.target[1], Vec3(2, 3, 4));
  EXPECT_EQ(t.has, (std::vector<std::uint8_t>{1, 1}));

  const std::vector<std::uint8_t> none{0, 0, 0, 1, 0, 0};
  EXPECT_EQ(phi_fit_targets(pts, none, 3).has, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_THROW(phi_fit_targets(pts, mask, 4), ValidationError);
}

std::vector<Vec3> repeat(const std::vector<Vec3>& v, int n_q) {
  std::vector<Vec3> out;
  for (const Vec3& p : v) out.insert(out.end(), static_cast<std::size_t>(n_q), p);
  return out;
}

TEST(PhiFit, ReproducesFullyControlledTargets) {
  const TriMesh face = icosphere(2, 30);
  std::vector<Vec3> moved = face.vertices;
  for (Vec3& v : moved) v += Vec3(0.2 * v.z(), 1.0, 0.0);
  const std::vector<std::uint8_t> mask(3 * moved.size(), 1);
  const PhiFitResult r = phi_fit(repeat(moved, 3), mask, 3, face);
  EXPECT_EQ(r.controlled, face.vertices.size());
  double worst = 0;
  for (std::size_t i = 0; i < moved.size(); ++i) worst = std::max(worst, (r.mesh.vertices[i] - moved[i]).norm());
  EXPECT_LT(worst, 0.05);
  EXPECT_TRUE(r.mesh.same_topology(face));
}

TEST(PhiFit, RigidEquivariance) {
  const TriMesh face = icosphere(2, 30);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> mask;
  for (const Vec3& v : face.vertices) {
    for (int k = 0; k < 3; ++k) {
      pts.push_back(v + Vec3(g(rng), g(rng), g(rng)));
      mask.push_back(k != 1 ? 1 : 0);
    }
  }
  const Mat3 r = testing::random_rotation(rng);
  const Vec3 t(5, -3, 8);
  TriMesh face_m = face;
  for (Vec3& v : face_m.vertices) v = r * v + t;
  std::vector<Vec3> pts_m = pts;
  for (Vec3& p : pts_m) p = r * p + t;

  const PhiFitResult a = phi_fit(pts, mask, 3, face);
  const PhiFitResult b = phi_fit(pts_m, mask, 3, face_m);
  double worst = 0;
  for (std::size_t i = 0; i < face.vertices.size(); ++i) {
    worst = std::max(worst, (b.mesh.vertices[i] - (r * a.mesh.vertices[i] + t)).norm());
  }
  EXPECT_LT(worst, 1e-8);
  EXPECT_NEAR(a.control_residual, b.control_residual, 1e-9);
}

TEST(PhiFit, RejectsLowCoverageAndBadWeights) {
  const TriMesh face = icosphere(1, 30);
  std::vector<std::uint8_t> mask(face.vertices.size(), 0);
  mask[0] = 1;
  EXPECT_THROW(phi_fit(face.vertices, mask, 1, face), ValidationError);
  const std::vector<std::uint8_t> all(face.vertices.size(), 1);
  PhiFitOptions o;
  o.lambda = 0;
  EXPECT_THROW(phi_fit(face.vertices, all, 1, face, o), ValidationError);
}

class TissueCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const TemplateSet& t = testing::template_set();
    std::vector<RegistrationCase> cases;
    for (const RegistrationCase& c : testing::truth_cases(4)) {
      cases.push_back(c);
      cases.push_back(flip_augment(c, t.face_symmetry, t.skull_symmetry));
    }
    tmm_ = new TmmModel(build_tmm(cases, template_index_map(t)));
    fsmm_ = new FsmmModel(build_fsmm(cases));
  }
  static void TearDownTestSuite() {
    delete tmm_;
    delete fsmm_;
  }
  static TmmModel* tmm_;
  static FsmmModel* fsmm_;
};

TmmModel* TissueCorpus::tmm_ = nullptr;
FsmmModel* TissueCorpus::fsmm_ = nullptr;

TEST_F(TissueCorpus, FitTissueRecoversModelSample) {
  TmmCoefficients truth = random_tmm_coefficients(*tmm_, 12, 1.0);
  truth.scale = 1.3;
  const TissueField observed = sample_tmm(*tmm_, truth);
  const TissueFit fit = fit_tissue(observed, *tmm_, 0.0);
  const TissueField back = sample_tmm(*tmm_, fit.coeffs);
  double worst = 0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    if (tmm_->valid[r]) worst = std::max(worst, (back.vectors[r] - observed.vectors[r]).norm());
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_LE(fit.residual, fit.baseline_residual);
  EXPECT_EQ(fit.entries, tmm_->valid_count());
}

// Exact data leaves the objective at rounding level after the warm start.
TEST(TissueFit, ExactDataConvergesOnLargerModel) {
  const TemplateSet& t = testing::template_set();
  std::vector<RegistrationCase> cases;
  for (const RegistrationCase& c : testing::truth_cases(10)) {
    cases.push_back(c);
    cases.push_back(flip_augment(c, t.face_symmetry, t.skull_symmetry));
  }
  const TmmModel m = build_tmm(cases, template_index_map(t));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TmmCoefficients k = random_tmm_coefficients(m, seed);
    k.scale = 0.8 + 0.1 * static_cast<double>(seed);
    const TissueField observed = sample_tmm(m, k);
    const TissueFit fit = fit_tissue(observed, m, 0.0);
    const TissueField back = sample_tmm(m, fit.coeffs);
    double num = 0, den = 0;
    for (std::size_t r = 0; r < m.rays(); ++r) {
      if (!m.valid[r]) continue;
      num += (back.vectors[r] - observed.vectors[r]).squaredNorm();
      den += observed.vectors[r].squaredNorm();
    }
    EXPECT_LT(std::sqrt(num / den), 1e-6) << seed;
    EXPECT_NEAR(fit.coeffs.scale, k.scale, 1e-6) << seed;
  }
}

TEST_F(TissueCorpus, FitTissueMeanAndPureScale) {
  TmmCoefficients two = TmmCoefficients::zero(*tmm_);
  for (double scale : {1.0, 2.0}) {
    two.scale = scale;
    const TissueFit fit = fit_tissue(sample_tmm(*tmm_, two), *tmm_);
    EXPECT_NEAR(fit.coeffs.scale, scale, 1e-9);
    EXPECT_LT(fit.coeffs.ti.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST_F(TissueCorpus, FitTissueRejectsSparseObservation) {
  TissueField observed = sample_tmm(*tmm_, TmmCoefficients::zero(*tmm_));
  std::fill(observed.mask.begin(), observed.mask.begin() + static_cast<long>(observed.size() * 3 / 4), 0);
  EXPECT_THROW(fit_tissue(observed, *tmm_), ValidationError);
}

TEST_F(TissueCorpus, FitFsmmRecoversModelSample) {
  FsmmCoefficients truth = random_fsmm_coefficients(*fsmm_, 21, 1.0);
  truth.angles = Vec3(0.03, -0.02, 0.04);
  truth.translation = Vec3(2, -1, 3);
  const FsmmSample s = sample_fsmm(*fsmm_, truth);
  const FsmmFit fit = fit_fsmm_to_mesh(s.face, *fsmm_);
  EXPECT_LT(fit.rmse, 1e-6);
  const FsmmSample back = sample_fsmm(*fsmm_, fit.coeffs);
  double sq = 0;
  for (std::size_t i = 0; i < s.face.vertices.size(); ++i) sq += (back.face.vertices[i] - s.face.vertices[i]).squaredNorm();
  EXPECT_LT(std::sqrt(sq / static_cast<double>(s.face.vertices.size())), 1e-6);
  EXPECT_LT((fit.coeffs.angles - truth.angles).norm(), 1e-6);
  ASSERT_FALSE(fit.rmse_history.empty());
  EXPECT_LE(fit.rmse_history.back(), fit.rmse_history.front());
}

TEST_F(TissueCorpus, FitFsmmRecoversPoseOfRotatedMean) {
  FsmmCoefficients truth = FsmmCoefficients::zero(*fsmm_);
  truth.angles = Vec3(0.0, 20.0 * std::numbers::pi / 180.0, 0.0);
  const FsmmSample s = sample_fsmm(*fsmm_, truth);
  const FsmmFit fit = fit_fsmm_to_mesh(s.skull, *fsmm_, {.which = FitTarget::Skull});
  EXPECT_LT((fit.coeffs.angles - truth.angles).norm(), 1e-6);
  EXPECT_LT(fit.coeffs.translation.norm(), 1e-6);
  EXPECT_LT(fit.coeffs.id.cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(TissueCorpus, FitFsmmToRawScanImproves) {
  const synth::SynthCase& c = testing::corpus(2).back();
  const FsmmFit fit = fit_fsmm_to_mesh(c.face_scan, *fsmm_);
  ASSERT_GE(fit.rmse_history.size(), 2u);
  EXPECT_LT(fit.rmse, fit.rmse_history.front());
  EXPECT_LT(fit.rmse, 0.01 * c.face_scan.bbox_diagonal());
}

TEST(Morph, EndpointsExactAndMidpointLinear) {
  const TriMesh a = icosphere(2, 10);
  TriMesh b = a;
  for (Vec3& v : b.vertices) v = 1.1 * v + Vec3(0.3, 0, 0);
  const MorphFrame f0 = interpolate_morph(a, b, 0.0);
  const MorphFrame f1 = interpolate_morph(a, b, 1.0);
  const MorphFrame fh = interpolate_morph(a, b, 0.5);
  EXPECT_EQ(f0.mesh.vertices, a.vertices);
  EXPECT_EQ(f1.mesh.vertices, b.vertices);
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    ASSERT_LT((fh.mesh.vertices[i] - 0.5 * (a.vertices[i] + b.vertices[i])).norm(), 1e-12);
    ASSERT_NEAR(fh.displacement[i], 0.5 * (b.vertices[i] - a.vertices[i]).norm(), 1e-12);
    ASSERT_EQ(f0.displacement[i], 0.0);
  }
  for (double t : {0.1, 0.25, 0.5, 0.75}) {
    const MorphFrame f = interpolate_morph(a, b, t);
    for (std::size_t i = 0; i < a.vertices.size(); ++i) ASSERT_EQ(f.displacement[i], t * f1.displacement[i]);
  }
  EXPECT_THROW(interpolate_morph(a, b, 1.5), ValidationError);
  EXPECT_THROW(interpolate_morph(a, icosphere(1, 10), 0.5), ValidationError);
}

double rms_surface_distance(const std::vector<Vec3>& pts, const TriMesh& gt) {
  const SpatialIndex index(gt);
  double sum = 0;
  for (const Vec3& p : pts) sum += index.closest_point(p).squared_distance;
  return std::sqrt(sum / static_cast<double>(pts.size()));
}

TEST(Surgery, NoOpPlanLeavesFaceInPlace) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  const PredictionResult r = predict_surgery(c.face, c.skull, c.skull, t.face_landmarks);
  double worst = 0;
  for (std::size_t i = 0; i < c.face.vertices.size(); ++i) {
    worst = std::max(worst, (r.face.vertices[i] - c.face.vertices[i]).norm());
  }
  EXPECT_LT(worst, 1.0);
  EXPECT_GT(r.diagnostics.at("valid_ray_fraction").get<double>(), 0.5);
}

TEST(Surgery, MandibleAdvanceMatchesTruth) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  Affine34 a = identity_affine();
  a(1, 3) = 4.0;
  const std::map<std::string, Affine34> plan{{"mandible", a}};
  const SurgeryPlan p = make_surgery_plan(c.skull, t.skull_regions, plan, 5.0);
  const synth::PostopTruth truth = synth::make_postop_truth(c, testing::head_templates(), plan, 5.0);
  ASSERT_EQ(p.skull_plan.vertices, truth.skull_plan.vertices);

  const PredictionResult r = predict_surgery(c.face, c.skull, p.skull_plan, t.face_landmarks);
  const double err = 100.0 * rms_surface_distance(r.face.vertices, truth.face_after) /
                     truth.face_after.bbox_diagonal();
  EXPECT_LT(err, 2.0);
  const double before = 100.0 * rms_surface_distance(c.face.vertices, truth.face_after) /
                        truth.face_after.bbox_diagonal();
  EXPECT_LT(err, before);
  ASSERT_EQ(r.displacement.size(), c.face.vertices.size());
}

TEST(Surgery, RigidMotionOfInputsMovesPrediction) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  Affine34 a = identity_affine();
  a(2, 3) = -3.0;
  const SurgeryPlan p = make_surgery_plan(c.skull, t.skull_regions, {{"maxilla", a}}, 5.0);
  std::mt19937_64 rng(8);
  const Mat3 r = testing::random_rotation(rng);
  const Vec3 shift(30, -20, 10);
  auto move = [&](TriMesh m) {
    for (Vec3& v : m.vertices) v = r * v + shift;
    return m;
  };
  const PredictionResult base = predict_surgery(c.face, c.skull, p.skull_plan, t.face_landmarks);
  const PredictionResult moved =
      predict_surgery(move(c.face), move(c.skull), move(p.skull_plan), t.face_landmarks);
  double worst = 0;
  for (std::size_t i = 0; i < c.face.vertices.size(); ++i) {
    worst = std::max(worst, (moved.face.vertices[i] - (r * base.face.vertices[i] + shift)).norm());
  }
  EXPECT_LT(worst, 1e-6 * c.face.bbox_diagonal());
}

TEST(Surgery, RegularizedPredictionRuns) {
  const TemplateSet& t = testing::template_set();
  std::vector<RegistrationCase> cases = testing::truth_cases(3);
  const TmmModel tmm = build_tmm(cases, template_index_map(t));
  const synth::SynthCase& c = testing::corpus(2).front();
  PredictOptions o;
  o.regularize_tissue = true;
  const PredictionResult r = predict_surgery(c.face, c.skull, c.skull, t.face_landmarks, &tmm, o);
  ASSERT_TRUE(r.tissue.has_value());
  EXPECT_TRUE(r.diagnostics.at("regularized_tissue").get<bool>());
  EXPECT_THROW(predict_surgery(c.face, c.skull, c.skull, t.face_landmarks, nullptr, o), ValidationError);
}

TEST(Surgery, RejectsSkullOutsideFace) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  TriMesh far = c.skull;
  for (Vec3& v : far.vertices) v += Vec3(1000, 0, 0);
  EXPECT_THROW(prepare_transport(c.face, far, t.face_landmarks), ValidationError);
  TriMesh other = icosphere(2, 50);
  EXPECT_THROW(predict_surgery(c.face, c.skull, other, t.face_landmarks), ValidationError);
}

}  // namespace
}  // namespace cranio
