// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/error.hpp"
#include "cranio/pipeline/registration.hpp"
#include "cranio/raycast/raycast.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

namespace cranio {
namespace {

using testing::icosphere;

RayBundle single_ray(const Vec3& o, const Vec3& t) {
  RayBundle r;
  r.origins = {o};
  r.targets = {t};
  return r;
}

TEST(PsiHit, AnalyticSphereHit) {
  const TriMesh sphere = icosphere(4, 1.0);
  ASSERT_EQ(sphere.faces.size(), 5120u);
  const HitSet h = psi_hit(single_ray(Vec3(0, 0, 2), Vec3(0, 0, -2)), SpatialIndex(sphere));
  ASSERT_TRUE(h.valid(0));
  EXPECT_LT((h.point(0) - Vec3(0, 0, 1)).norm(), 1e-3);
  EXPECT_LT((h.vector(0) - Vec3(0, 0, 1)).norm(), 1e-3);
}

TEST(PsiHit, GuaranteedMissHoldsSentinel) {
  const HitSet h = psi_hit(single_ray(Vec3(5, 5, 5), Vec3(6, 6, 6)), SpatialIndex(icosphere(4, 1.0)));
  EXPECT_FALSE(h.valid(0));
  EXPECT_TRUE(h.points[0].array().isNaN().all());
  EXPECT_TRUE(h.vectors[0].array().isNaN().all());
  EXPECT_THROW(h.point(0), ValidationError);
}

TEST(PsiHit, RejectsDegenerateRay) {
  EXPECT_THROW(psi_hit(single_ray(Vec3(1, 1, 1), Vec3(1, 1, 1)), SpatialIndex(icosphere(1, 1.0))),
               ValidationError);
}

class SkullRays : public ::testing::Test {
 protected:
  void SetUp() override {
    skull = synth::make_skull_mesh(40, 40);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    const Aabb b = skull.bounds();
    for (int i = 0; i < 2000; ++i) {
      const Vec3 o = b.center() + 0.6 * (b.max - b.min).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
      rays.origins.push_back(o);
      rays.targets.push_back(o + Vec3(u(rng), u(rng), u(rng)).normalized() * 10.0);
    }
  }
  TriMesh skull;
  RayBundle rays;
};

TEST_F(SkullRays, AcceleratedMatchesBruteForce) {
  const HitSet a = psi_hit(rays, SpatialIndex(skull));
  const HitSet b = psi_hit_brute_force(rays, skull);
  ASSERT_EQ(a.mask, b.mask);
  const double diag = skull.bbox_diagonal();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.valid(i)) {
      ASSERT_LT((a.point(i) - b.point(i)).norm(), 1e-9 * diag);
    }
  }
  EXPECT_GT(a.valid_count(), 100u);
}

TEST_F(SkullRays, HitsSatisfyRayEquationAndThickness) {
  const HitSet h = psi_hit(rays, SpatialIndex(skull));
  const double guard = 1e-6 * skull.bbox_diagonal();
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!h.valid(i)) continue;
    const Vec3 d = rays.direction(i);
    const Vec3 rel = h.point(i) - rays.origins[i];
    const double t = rel.dot(d);
    ASSERT_GT(t, guard);
    ASSERT_LT((rel - t * d).norm(), 1e-9 * (1 + t));
    ASSERT_EQ(h.vector(i), rays.origins[i] - h.point(i));
    ASSERT_GT(h.vector(i).norm(), 0.0);
  }
}

TEST_F(SkullRays, PermutingRaysPermutesHits) {
  std::vector<std::size_t> perm(rays.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  RayBundle shuffled;
  for (std::size_t i : perm) {
    shuffled.origins.push_back(rays.origins[i]);
    shuffled.targets.push_back(rays.targets[i]);
  }
  const SpatialIndex index(skull);
  const HitSet a = psi_hit(rays, index);
  const HitSet b = psi_hit(shuffled, index);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    ASSERT_EQ(b.mask[k], a.mask[perm[k]]);
    if (b.valid(k)) {
      ASSERT_EQ(b.point(k), a.point(perm[k]));
    }
  }
}

TEST_F(SkullRays, HitSetFileRoundTrip) {
  const HitSet h = psi_hit(rays, SpatialIndex(skull));
  const auto dir = testing::scratch_dir("hitset");
  save_hitset(h, dir / "tissue.bin");
  const HitSet back = load_hitset(dir / "tissue.bin");
  ASSERT_EQ(back.mask, h.mask);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.valid(i)) {
      ASSERT_LT((back.point(i) - h.point(i)).norm(), 1e-4);
    } else {
      ASSERT_TRUE(back.points[i].array().isNaN().all());
    }
  }
}

TEST(NormalMatch, IdentityFallsBackToSelf) {
  const TriMesh m = icosphere(3, 1.0);
  const NormalMatch nm = normal_ray_match(m, SpatialIndex(m));
  ASSERT_EQ(nm.source.size(), m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    ASSERT_LT((nm.target[i] - m.vertices[i]).norm(), 1e-12);
  }
  EXPECT_EQ(nm.fallback_count(), m.vertices.size());
}

TEST(NormalMatch, ConcentricSpheresAreRadial) {
  const TriMesh inner = icosphere(3, 1.0);
  const TriMesh outer = icosphere(3, 1.1);
  const NormalMatch nm = normal_ray_match(inner, SpatialIndex(outer));
  for (std::size_t i = 0; i < inner.vertices.size(); ++i) {
    ASSERT_NEAR(nm.target[i].norm(), 1.1, 5e-3);
    ASSERT_GT(nm.target[i].normalized().dot(inner.vertices[i].normalized()), 1.0 - 1e-4);
  }
  EXPECT_EQ(nm.fallback_count(), 0u);
}

TEST(NormalMatch, GeneratorScanPairNearTruth) {
  const TemplateSet& t = testing::template_set();
  const synth::SynthCase& c = testing::corpus(2).front();
  DeformConfig none = DeformConfig::defaults();
  none.iterations = 0;
  const InitialFitResult init = initial_face_fit(t.face, t.face_landmarks, c.face_landmarks, c.face_scan, none);
  const NormalMatch nm = normal_ray_match(init.mesh, SpatialIndex(c.face_scan));
  const double tol = 0.02 * c.face.bbox_diagonal();
  std::size_t good = 0;
  for (std::size_t i = 0; i < nm.target.size(); ++i) {
    if ((nm.target[i] - c.face.vertices[i]).norm() <= tol) ++good;
  }
  EXPECT_GE(static_cast<double>(good), 0.95 * static_cast<double>(nm.target.size()));
}

TEST(SkullRayBundle, OrderingAndCounts) {
  const TriMesh face = icosphere(1, 50);
  const std::vector<Vec3> q{Vec3(0, 0, -200)};
  TriMesh three;
  three.vertices = {face.vertices[0], face.vertices[1], face.vertices[2]};
  const RayBundle r = build_skull_rays(three, q, 1);
  ASSERT_EQ(r.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.origins[j], three.vertices[j]);

  const std::vector<Vec3> q3{Vec3(0, 0, -200), Vec3(10, 0, -200), Vec3(-10, 0, -200)};
  const RayBundle all = build_skull_rays(face, q3, 1);
  ASSERT_EQ(all.size(), 3 * face.vertices.size());
  EXPECT_EQ(all.origins[3 * 5 + 2], face.vertices[5]);
  EXPECT_EQ(all.targets[3 * 5 + 2], q3[2]);

  EXPECT_EQ(strided_origins(35709, 100).size(), 358u);
  EXPECT_EQ(strided_origins(8099, 1).size(), 8099u);
  EXPECT_THROW(strided_origins(10, 0), ValidationError);
}

TEST(SkullRayBundle, TemplateFaceCount) {
  const TemplateSet& t = testing::template_set();
  const std::vector<Vec3> q = psi_map(t.face, t.face_landmarks, 3);
  EXPECT_EQ(build_skull_rays(t.face, q, 1).size(), 3 * t.face.vertices.size());
}

}  // namespace
}  // namespace cranio
