// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/error.hpp"
#include "cranio/pipeline/procrustes.hpp"
#include "cranio/pipeline/registration.hpp"
#include "cranio/util/hash.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace cranio {
namespace {

using testing::random_rotation;

TEST(Procrustes, RecoversKnownSimilarity) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<Vec3> src(30);
  for (Vec3& p : src) p = Vec3(u(rng), u(rng), u(rng));
  Similarity truth;
  truth.scale = 1.37;
  truth.rotation = random_rotation(rng);
  truth.translation = Vec3(4, -9, 12);
  const std::vector<Vec3> dst = truth.apply(src);

  const Similarity s = fit_similarity(src, dst);
  EXPECT_NEAR(s.scale, truth.scale, 1e-12);
  EXPECT_LT((s.rotation - truth.rotation).norm(), 1e-12);
  EXPECT_LT((s.translation - truth.translation).norm(), 1e-10);
  EXPECT_NEAR(s.rotation.determinant(), 1.0, 1e-12);

  const Similarity rigid = fit_similarity(src, dst, false);
  EXPECT_DOUBLE_EQ(rigid.scale, 1.0);
  EXPECT_LT((rigid.rotation - truth.rotation).norm(), 1e-12);
}

TEST(Procrustes, NeverReturnsReflection) {
  std::vector<Vec3> src{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  std::vector<Vec3> dst = src;
  for (Vec3& p : dst) p.x() = -p.x();
  EXPECT_NEAR(fit_similarity(src, dst).rotation.determinant(), 1.0, 1e-12);
  EXPECT_THROW(fit_similarity(src, std::vector<Vec3>(3, Vec3::Zero())), ValidationError);
}

TEST(PsiMap, CountsOrderAndRigidEquivariance) {
  const synth::SynthCase& c = testing::corpus(2).front();
  for (int n_q : {1, 3, 5}) EXPECT_EQ(psi_map(c.face_landmarks, n_q).size(), static_cast<std::size_t>(n_q));

  std::mt19937_64 rng(2);
  const Mat3 r = random_rotation(rng);
  const Vec3 t(10, 20, -30);
  std::map<std::string, Vec3> moved;
  for (const auto& [name, p] : c.face_landmarks) moved[name] = r * p + t;
  const auto q = psi_map(c.face_landmarks, 3);
  const auto qm = psi_map(moved, 3);
  for (std::size_t k = 0; k < q.size(); ++k) EXPECT_LT((qm[k] - (r * q[k] + t)).norm(), 1e-9);

  // Endpoints sit behind the face, on the far side of the ear axis from the nose.
  const Vec3 ears = 0.5 * (c.face_landmarks.at("tragion_left") + c.face_landmarks.at("tragion_right"));
  const Vec3 forward = c.face_landmarks.at("nose_tip") - ears;
  for (const Vec3& p : q) EXPECT_LT((p - ears).dot(forward), 0.0);

  std::map<std::string, Vec3> missing = c.face_landmarks;
  missing.erase("menton");
  EXPECT_THROW(psi_map(missing, 3), ValidationError);
  EXPECT_THROW(psi_map(c.face_landmarks, 0), ValidationError);
}

TEST(FlipAugment, TwiceIsIdentity) {
  const TemplateSet& t = testing::template_set();
  const RegistrationCase c = testing::truth_case(testing::corpus(2).front());
  const RegistrationCase f = flip_augment(c, t.face_symmetry, t.skull_symmetry);
  const RegistrationCase ff = flip_augment(f, t.face_symmetry, t.skull_symmetry);

  EXPECT_EQ(f.tissue.valid_count(), c.tissue.valid_count());
  EXPECT_TRUE(f.provenance.at("flipped").get<bool>());
  EXPECT_FALSE(ff.provenance.at("flipped").get<bool>());
  for (std::size_t i = 0; i < c.face.vertices.size(); ++i) {
    ASSERT_EQ(ff.face.vertices[i], c.face.vertices[i]);
    const Vec3& a = f.face.vertices[i];
    const Vec3& b = c.face.vertices[static_cast<std::size_t>(t.face_symmetry[i])];
    ASSERT_EQ(a, Vec3(-b.x(), b.y(), b.z()));
  }
  for (std::size_t i = 0; i < c.skull.vertices.size(); ++i) ASSERT_EQ(ff.skull.vertices[i], c.skull.vertices[i]);
  ASSERT_EQ(ff.tissue.mask, c.tissue.mask);
  for (std::size_t i = 0; i < c.tissue.size(); ++i) {
    if (c.tissue.valid(i)) {
      ASSERT_EQ(ff.tissue.vector(i), c.tissue.vector(i));
    }
  }
}

TEST(FlipAugment, RejectsStridedCase) {
  const TemplateSet& t = testing::template_set();
  RegistrationCase c = testing::truth_case(testing::corpus(2).front());
  c.origin_stride = 10;
  EXPECT_THROW(flip_augment(c, t.face_symmetry, t.skull_symmetry), ValidationError);
}

TEST(RegistrationIo, SaveLoadRoundTrip) {
  const RegistrationCase c = testing::truth_case(testing::corpus(2).front());
  const auto dir = testing::scratch_dir("registration");
  save_registration(c, dir);
  const RegistrationCase back = load_registration(dir);
  EXPECT_EQ(back.id, c.id);
  EXPECT_EQ(back.n_q, c.n_q);
  EXPECT_EQ(back.face.vertices, c.face.vertices);
  EXPECT_EQ(back.skull.vertices, c.skull.vertices);
  EXPECT_EQ(back.tissue.mask, c.tissue.mask);
}

TEST(IndexMap, NearestVertexAndFallback) {
  TriMesh skull;
  skull.vertices = {Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(0, 10, 0)};
  HitSet hits;
  hits.resize_invalid(2);
  hits.set(0, Vec3(9, 1, 5), Vec3(9, 1, 0));
  const std::vector<Vec3> origins{Vec3(9, 1, 5), Vec3(1, 9, 5)};
  const IndexMap m = build_index_map(skull, hits, origins);
  EXPECT_EQ(m.index, (std::vector<int>{1, 2}));
  EXPECT_EQ(m.fallback, (std::vector<std::uint8_t>{0, 1}));
  EXPECT_THROW(build_index_map(skull, hits, {Vec3::Zero()}), ValidationError);
}

TEST(RegistrationOptions, JsonRoundTrip) {
  RegistrationOptions o;
  o.rays.n_q = 5;
  o.rays.origin_stride = 10;
  o.face.mu = 7;
  const nlohmann::json j = o;
  EXPECT_EQ(nlohmann::json(j.get<RegistrationOptions>()), j);
  nlohmann::json bad = j;
  bad["extra"] = 1;
  EXPECT_THROW(bad.get<RegistrationOptions>(), ValidationError);
}

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto dir = testing::scratch_dir("hash");
  { std::ofstream(dir / "f.txt", std::ios::binary) << "abc"; }
  EXPECT_EQ(sha256_file(dir / "f.txt"), sha256_hex("abc"));
}

TEST(Registration, SyntheticSubjectFaceWithinTwoPercent) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  const RegistrationReport r =
      register_subject(t, c.face_scan, c.skull_ct, c.face_landmarks, RegistrationOptions{}, c.id);
  ASSERT_TRUE(r.registered.face.same_topology(t.face));
  ASSERT_TRUE(r.registered.skull.same_topology(t.skull));

  const SpatialIndex gt(c.face);
  double sum = 0;
  for (const Vec3& v : r.registered.face.vertices) sum += gt.closest_point(v).squared_distance;
  const double rmse = std::sqrt(sum / static_cast<double>(r.registered.face.vertices.size()));
  EXPECT_LT(100.0 * rmse / c.face.bbox_diagonal(), 2.0);
  EXPECT_EQ(r.registered.tissue.size(), 3 * t.face.vertices.size());
  EXPECT_GT(r.skull.joint_valid, kMinSkullControls);
}

}  // namespace
}  // namespace cranio
