// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/error.hpp"
#include "cranio/geometry/laplacian.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/geometry/normals.hpp"
#include "cranio/geometry/primitives.hpp"
#include "cranio/geometry/region_edit.hpp"
#include "cranio/geometry/spatial_index.hpp"
#include "cranio/util/hash.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

namespace cranio {
namespace {

using testing::grid_plane;
using testing::icosphere;

TEST(Mesh, ValidateRejectsBadIndexAndNonFinite) {
  TriMesh m = grid_plane(3, 3, 1, 1);
  EXPECT_NO_THROW(m.validate());
  m.faces.push_back({0, 1, 99});
  EXPECT_THROW(m.validate(), ValidationError);
  m = grid_plane(3, 3, 1, 1);
  m.vertices[2].x() = std::nan("");
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(Mesh, BoundsAndDiagonal) {
  const TriMesh m = grid_plane(4, 5, 30, 40);
  EXPECT_DOUBLE_EQ(m.bbox_diagonal(), 50.0);
  EXPECT_TRUE(m.bounds().contains(Vec3(15, 20, 0)));
}

TEST(MeshIo, PlyRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  TriMesh m = icosphere(2, 37.3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Vec3& v : m.vertices) v += 1e-7 * Vec3(u(rng), u(rng), u(rng));
  m.albedo = std::vector<Vec3>(m.vertices.size(), Vec3(0.25, 0.5, 0.75));
  for (bool binary : {true, false}) {
    PlyOptions o;
    o.binary = binary;
    const TriMesh back = from_ply_bytes(to_ply_bytes(m, o));
    ASSERT_TRUE(back.same_topology(m));
    for (std::size_t i = 0; i < m.vertices.size(); ++i) ASSERT_EQ(back.vertices[i], m.vertices[i]);
    ASSERT_TRUE(back.albedo.has_value());
  }
}

TEST(MeshIo, ObjRoundTripAndTruncatedPly) {
  const TriMesh m = icosphere(1, 10);
  std::stringstream s;
  const SaveReport r = write_obj(m, s);
  EXPECT_FALSE(r.albedo_dropped);
  const TriMesh back = read_obj(s, "mem.obj");
  EXPECT_TRUE(back.same_topology(m));

  const std::string bytes = to_ply_bytes(m);
  EXPECT_THROW(from_ply_bytes(bytes.substr(0, bytes.size() / 2)), ParseError);
}

TEST(MeshIo, ObjSingleTriangle) {
  std::istringstream s("# one triangle\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  const TriMesh m = read_obj(s, "tri.obj");
  ASSERT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.vertices[1], Vec3(1, 0, 0));
  EXPECT_EQ(m.faces[0], (Face{0, 1, 2}));

  std::istringstream degenerate("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\nf 1 1 2\n");
  try {
    read_obj(degenerate, "bad.obj");
    FAIL() << "degenerate face accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("face 1"), std::string::npos) << e.what();
  }
}

TEST(MeshIo, PlyColorBecomesAlbedo) {
  std::istringstream s(
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\nelement face 2\n"
      "property list uchar int vertex_indices\nend_header\n"
      "0 0 0 255 0 0\n1 0 0 255 0 0\n1 1 0 255 0 0\n0 1 0 255 0 0\n3 0 1 2\n3 0 2 3\n");
  const TriMesh m = read_ply(s, "red.ply");
  ASSERT_EQ(m.vertices.size(), 4u);
  ASSERT_TRUE(m.albedo.has_value());
  for (const Vec3& a : *m.albedo) EXPECT_EQ(a, Vec3(1, 0, 0));
}

TEST(MeshIo, SkullFileRoundTripIsBitExact) {
  const TriMesh skull = synth::make_skull_mesh(51, 51);
  ASSERT_GT(skull.faces.size(), 4500u);
  const auto dir = testing::scratch_dir("skull_io");
  save_mesh(skull, dir / "a.ply");
  const TriMesh back = load_mesh(dir / "a.ply");
  EXPECT_EQ(back.vertices, skull.vertices);
  EXPECT_EQ(back.faces, skull.faces);
  save_mesh(back, dir / "b.ply");
  EXPECT_EQ(sha256_file(dir / "a.ply"), sha256_file(dir / "b.ply"));
}

TEST(MeshIo, UnitCubeFacesSurviveBothFormatsAndObjDropsAlbedo) {
  TriMesh cube;
  for (int i = 0; i < 8; ++i) cube.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  cube.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  const auto dir = testing::scratch_dir("cube_io");
  for (const char* name : {"cube.obj", "cube.ply"}) {
    save_mesh(cube, dir / name);
    EXPECT_EQ(load_mesh(dir / name).faces, cube.faces) << name;
  }
  cube.albedo = std::vector<Vec3>(8, Vec3(0.5, 0.5, 0.5));
  EXPECT_TRUE(save_mesh(cube, dir / "cube.obj").albedo_dropped);
  EXPECT_FALSE(save_mesh(cube, dir / "cube.ply").albedo_dropped);
}

TEST(Primitives, ClosestPointOnTriangleRegions) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  EXPECT_TRUE(closest_point_on_triangle(Vec3(0.2, 0.2, 5), a, b, c).point.isApprox(Vec3(0.2, 0.2, 0)));
  EXPECT_TRUE(closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c).point.isApprox(a));
  EXPECT_TRUE(closest_point_on_triangle(Vec3(1, 1, 0), a, b, c).point.isApprox(Vec3(0.5, 0.5, 0)));
  const TrianglePoint p = closest_point_on_triangle(Vec3(0.3, -2, 1), a, b, c);
  EXPECT_NEAR(p.barycentric.sum(), 1.0, 1e-15);
}

TEST(Primitives, RayTriangle) {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  const auto hit = intersect_ray_triangle(Vec3(0.25, 0.25, 2), Vec3(0, 0, -2), a, b, c, 0.0);
  ASSERT_TRUE(hit);
  EXPECT_DOUBLE_EQ(hit->t, 1.0);  // dir is not normalized
  EXPECT_DOUBLE_EQ(hit->u, 0.25);
  EXPECT_FALSE(intersect_ray_triangle(Vec3(2, 2, 2), Vec3(0, 0, -1), a, b, c, 0.0));
  EXPECT_FALSE(intersect_ray_triangle(Vec3(0.25, 0.25, 2), Vec3(0, 0, 1), a, b, c, 0.0));
}

TEST(SpatialIndex, ClosestPointMatchesBruteForce) {
  const TriMesh m = icosphere(3, 50);
  const SpatialIndex index(m);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-80, 80);
  for (int i = 0; i < 500; ++i) {
    const Vec3 q(u(rng), u(rng), u(rng));
    const ClosestPoint a = index.closest_point(q);
    const ClosestPoint b = closest_point_brute_force(m, q);
    ASSERT_NEAR(a.squared_distance, b.squared_distance, 1e-9 * (1 + b.squared_distance));
  }
}

TEST(SpatialIndex, RayMatchesBruteForce) {
  const TriMesh m = icosphere(3, 50);
  const SpatialIndex index(m);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 500; ++i) {
    const Vec3 o(30 * u(rng), 30 * u(rng), 30 * u(rng));
    const Vec3 d = Vec3(u(rng), u(rng), u(rng)).normalized();
    const auto a = index.intersect(o, d, 1e-9);
    const auto b = intersect_brute_force(m, o, d, 1e-9);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) {
      ASSERT_EQ(a->face, b->face);
      ASSERT_NEAR(a->t, b->t, 1e-12 * (1 + b->t));
    }
  }
}

TEST(PointIndex, NearestMatchesBruteForceAndTieBreaksLow) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Vec3> pts(400);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  pts.push_back(pts[17]);  // duplicate of an earlier point
  const PointIndex index(pts);
  for (int i = 0; i < 300; ++i) {
    const Vec3 q(u(rng), u(rng), u(rng));
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double d = (pts[k] - q).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(k);
      }
    }
    const auto n = index.nearest(q);
    ASSERT_EQ(n.index, arg);
    ASSERT_EQ(n.squared_distance, best);
  }
  EXPECT_EQ(index.nearest(pts[17]).index, 17);
  EXPECT_THROW(PointIndex({}).nearest(Vec3::Zero()), ValidationError);
}

TEST(Normals, SphereNormalsPointOutward) {
  const TriMesh m = icosphere(2, 5);
  const std::vector<Vec3> n = vertex_normals(m);
  for (std::size_t i = 0; i < n.size(); ++i) {
    ASSERT_GT(n[i].dot(m.vertices[i].normalized()), 0.99);
    ASSERT_NEAR(n[i].norm(), 1.0, 1e-12);
  }
}

TEST(Normals, FlatSquareAndIsolatedVertexFallback) {
  TriMesh m = grid_plane(4, 4, 3, 3);
  m.vertices.emplace_back(10, 10, 10);  // referenced by no face
  const std::vector<Vec3> n = vertex_normals(m);
  for (std::size_t i = 0; i + 1 < n.size(); ++i) ASSERT_EQ(n[i], Vec3(0, 0, 1));
  EXPECT_EQ(n.back(), Vec3(0, 0, 1));
}

TEST(Normals, IcosphereWithinFiveDegreesOfRadial) {
  const TriMesh m = icosphere(3, 20);
  const double cos5 = std::cos(5.0 * std::numbers::pi / 180.0);
  const std::vector<Vec3> n = vertex_normals(m);
  for (std::size_t i = 0; i < n.size(); ++i) ASSERT_GT(n[i].dot(m.vertices[i].normalized()), cos5);
}

TEST(Normals, FaceTemplateMatchesAccumulationOracle) {
  const TriMesh& face = testing::template_set().face;
  std::vector<Vec3> sum(face.vertices.size(), Vec3::Zero());
  for (const Face& f : face.faces) {
    const Vec3& a = face.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = face.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = face.vertices[static_cast<std::size_t>(f[2])];
    const Vec3 w = (b - a).cross(c - a);  // twice the area along the unit normal
    for (int k = 0; k < 3; ++k) sum[static_cast<std::size_t>(f[k])] += w;
  }
  const std::vector<Vec3> n = vertex_normals(face);
  double worst = 0;
  for (std::size_t i = 0; i < n.size(); ++i) worst = std::max(worst, (n[i] - sum[i].normalized()).norm());
  EXPECT_EQ(worst, 0.0);
}

TEST(SpatialIndex, SkullQueriesMatchBruteForce) {
  const TriMesh skull = synth::make_skull_mesh(51, 51);
  const SpatialIndex index(skull);
  EXPECT_EQ(index.closest_point(skull.vertices[123]).squared_distance, 0.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  const Aabb box = skull.bounds();
  for (int i = 0; i < 1000; ++i) {
    const Vec3 q = box.center() + 0.7 * (box.max - box.min).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    const ClosestPoint a = index.closest_point(q);
    const ClosestPoint b = closest_point_brute_force(skull, q);
    if (a.face != b.face) {
      ASSERT_NEAR(a.squared_distance, b.squared_distance, 1e-12) << i;
    }
  }
  const TriMesh empty;
  EXPECT_THROW(SpatialIndex(empty).closest_point(Vec3::Zero()), ValidationError);
}

TEST(Laplacian, ConstantFieldMapsToZeroAndRowsSumToZero) {
  const TriMesh m = icosphere(2, 3);
  for (auto w : {LaplacianWeighting::Uniform, LaplacianWeighting::Cotangent}) {
    const LaplacianOperator L(m, w);
    const std::vector<Vec3> c(m.vertices.size(), Vec3(1.5, -2, 3));
    for (const Vec3& v : L.apply(c)) ASSERT_LT(v.norm(), 1e-12);
  }
}

TEST(Laplacian, LinearFieldIsHarmonicAtInteriorGridVertices) {
  // On a regular grid with this triangulation every interior vertex has a
  // point-symmetric one-ring, so the uniform Laplacian of a linear field is zero.
  const TriMesh m = grid_plane(6, 6, 5, 5);
  std::vector<Vec3> f(m.vertices.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = Vec3(2 * m.vertices[i].x() - m.vertices[i].y(), 0, 1);
  const std::vector<Vec3> lf = LaplacianOperator(m).apply(f);
  for (int r = 1; r < 5; ++r) {
    for (int c = 1; c < 5; ++c) ASSERT_LT(lf[static_cast<std::size_t>(r * 6 + c)].norm(), 1e-12);
  }
}

TEST(SmoothInterpolate, ReproducesAnchorsAndConstants) {
  const TriMesh m = icosphere(2, 10);
  const std::vector<int> anchors{0, 5, 40, 77};
  const std::vector<Vec3> same(anchors.size(), Vec3(1, 2, 3));
  for (const Vec3& u : smooth_interpolate(m, anchors, same)) ASSERT_LT((u - Vec3(1, 2, 3)).norm(), 1e-6);

  const std::vector<Vec3> vals{Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 1, 1)};
  const std::vector<Vec3> u = smooth_interpolate(m, anchors, vals, 1e8);
  for (std::size_t k = 0; k < anchors.size(); ++k) ASSERT_LT((u[anchors[k]] - vals[k]).norm(), 1e-5);

  EXPECT_THROW(smooth_interpolate(m, {}, {}), ValidationError);
  const std::vector<int> bad{100000};
  EXPECT_THROW(smooth_interpolate(m, bad, std::vector<Vec3>{Vec3::Zero()}), ValidationError);
}

RegionLabels two_regions(const TriMesh& m) {
  RegionLabels l;
  l.names = {"left", "right"};
  for (const Vec3& v : m.vertices) l.vertex_region.push_back(v.x() < 50 ? 0 : 1);
  return l;
}

TEST(RegionEditor, IdentityLeavesPointsUnchanged) {
  const TriMesh m = grid_plane(21, 5, 100, 20);
  RegionEditor e(m.vertices, two_regions(m), 5.0);
  e.set_transforms({{"left", identity_affine()}});
  EXPECT_EQ(e.apply(), m.vertices);
}

TEST(RegionEditor, TranslationMovesRegionAndFadesOverBand) {
  const TriMesh m = grid_plane(101, 3, 100, 2);
  const RegionLabels labels = two_regions(m);
  RegionEditor e(m.vertices, labels, 5.0);
  Affine34 a = identity_affine();
  a(2, 3) = 4.0;
  e.set_transforms({{"left", a}});
  const std::vector<Vec3> out = e.apply();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = m.vertices[i].x();
    const double dz = out[i].z();
    if (labels.vertex_region[i] == 0) {
      ASSERT_DOUBLE_EQ(dz, 4.0);
    } else {
      // Distance to the nearest left-labelled point is x - 49 on this grid.
      const double d = x - 49.0;
      ASSERT_NEAR(dz, 4.0 * std::max(0.0, 1.0 - d / 5.0), 1e-12) << "x=" << x;
    }
  }
}

TEST(RegionEditor, RejectsUnknownRegionAndNonFinite) {
  const TriMesh m = grid_plane(5, 5, 100, 100);
  RegionEditor e(m.vertices, two_regions(m), 5.0);
  EXPECT_THROW(e.set_transforms({{"jaw", identity_affine()}}), ValidationError);
  Affine34 bad = identity_affine();
  bad(0, 3) = std::nan("");
  EXPECT_THROW(e.set_transforms({{"left", bad}}), ValidationError);
}

TEST(Types, AnglesInvertRotation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.4, 1.4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 ang(u(rng), u(rng), u(rng));
    ASSERT_LT((angles_xyz(rotation_xyz(ang)) - ang).norm(), 1e-12);
  }
}

}  // namespace
}  // namespace cranio
