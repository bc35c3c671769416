// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/error.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/synth/generator.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace cranio {
namespace {

using synth::HeadTemplates;

TEST(Templates, DeskVertexCounts) {
  const HeadTemplates& t = testing::head_templates();
  EXPECT_EQ(t.face.vertices.size(), 8099u);
  EXPECT_EQ(t.skull.vertices.size(), 5099u);
  EXPECT_NO_THROW(t.face.validate());
  EXPECT_NO_THROW(t.skull.validate());
  EXPECT_NO_THROW(testing::template_set().validate());
}

void expect_mirror_involution(const TriMesh& m, const std::vector<int>& sym) {
  ASSERT_EQ(sym.size(), m.vertices.size());
  for (std::size_t i = 0; i < sym.size(); ++i) {
    const auto j = static_cast<std::size_t>(sym[i]);
    ASSERT_EQ(static_cast<std::size_t>(sym[j]), i);
    const Vec3& a = m.vertices[i];
    const Vec3& b = m.vertices[j];
    ASSERT_LT((a - Vec3(-b.x(), b.y(), b.z())).norm(), 1e-9);
  }
}

TEST(Templates, SymmetryMapsAreMirrorInvolutions) {
  const HeadTemplates& t = testing::head_templates();
  expect_mirror_involution(t.face, t.face_symmetry);
  expect_mirror_involution(t.skull, t.skull_symmetry);
}

TEST(Templates, RegionsCoverSkull) {
  const HeadTemplates& t = testing::head_templates();
  ASSERT_EQ(t.skull_regions.vertex_region.size(), t.skull.vertices.size());
  std::vector<int> counts(t.skull_regions.names.size(), 0);
  for (int r : t.skull_regions.vertex_region) ++counts.at(static_cast<std::size_t>(r));
  for (int c : counts) EXPECT_GT(c, 0);
}

TEST(Generator, SameSeedIsBitIdentical) {
  const HeadTemplates& t = testing::head_templates();
  const auto a = synth::generate_corpus(t, 2, 77);
  const auto b = synth::generate_corpus(t, 2, 77);
  const auto c = synth::generate_corpus(t, 2, 78);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(to_ply_bytes(a[k].face_scan), to_ply_bytes(b[k].face_scan));
    EXPECT_EQ(to_ply_bytes(a[k].skull_ct), to_ply_bytes(b[k].skull_ct));
    EXPECT_EQ(a[k].face_landmarks, b[k].face_landmarks);
  }
  EXPECT_NE(a[0].face.vertices, c[0].face.vertices);
}

TEST(Generator, CaseIsConsistent) {
  const HeadTemplates& t = testing::head_templates();
  const synth::SynthCase& c = testing::corpus(2).front();
  ASSERT_TRUE(c.face.same_topology(t.face));
  ASSERT_TRUE(c.skull.same_topology(t.skull));
  ASSERT_EQ(c.anchors.size(), c.face.vertices.size());
  for (std::size_t i = 0; i < c.anchors.size(); ++i) {
    ASSERT_LT((c.anchors[i] + c.thickness[i] - c.face.vertices[i]).norm(), 1e-9);
    ASSERT_GT(c.thickness[i].norm(), 0.0);
  }
  // Raw meshes are resampled: different vertex counts, same surfaces.
  EXPECT_NE(c.face_scan.vertices.size(), c.face.vertices.size());
  const synth::CaseSurface surface(t.shape, c.params);
  for (std::size_t i = 0; i < c.face_scan_params.size(); i += 97) {
    const synth::Vec2& p = c.face_scan_params[i];
    ASSERT_LT((surface.face(p.x(), p.y()) - c.face_scan_clean[i]).norm(), 1e-9);
    ASSERT_LT((c.face_scan.vertices[i] - c.face_scan_clean[i]).norm(), 1.0);
  }
  for (const auto& [name, pos] : c.face_landmarks) {
    const Landmark& l = t.face_landmarks.at(name);
    EXPECT_LT((c.face.vertices[static_cast<std::size_t>(l.vertex)] - pos).norm(), 1e-9) << name;
  }
}

TEST(Generator, ParamsJsonRoundTrip) {
  const synth::SynthParams p = synth::draw_params(5, {});
  const nlohmann::json j = p;
  EXPECT_EQ(nlohmann::json(j.get<synth::SynthParams>()), j);
  synth::SynthParams bad = p;
  bad.jitter = -1;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Postop, IdentityPlanChangesNothing) {
  const HeadTemplates& t = testing::head_templates();
  const synth::SynthCase& c = testing::corpus(2).front();
  const synth::PostopTruth p = synth::make_postop_truth(c, t, {{"mandible", identity_affine()}});
  EXPECT_EQ(p.skull_plan.vertices, c.skull.vertices);
  EXPECT_EQ(p.face_after.vertices, c.face.vertices);
}

TEST(Postop, TranslationMovesOnlyRegionAndBand) {
  const HeadTemplates& t = testing::head_templates();
  const synth::SynthCase& c = testing::corpus(2).front();
  Affine34 a = identity_affine();
  a(1, 3) = 4.0;
  const synth::PostopTruth p = synth::make_postop_truth(c, t, {{"mandible", a}}, 5.0);
  const auto& names = t.skull_regions.names;
  const int mandible = static_cast<int>(std::find(names.begin(), names.end(), "mandible") - names.begin());
  std::vector<Vec3> region;
  for (std::size_t i = 0; i < c.skull.vertices.size(); ++i) {
    if (t.skull_regions.vertex_region[i] == mandible) region.push_back(c.skull.vertices[i]);
  }
  ASSERT_FALSE(region.empty());
  for (std::size_t i = 0; i < c.skull.vertices.size(); ++i) {
    const Vec3 d = p.skull_plan.vertices[i] - c.skull.vertices[i];
    if (t.skull_regions.vertex_region[i] == mandible) {
      ASSERT_LT((d - Vec3(0, 4, 0)).norm(), 1e-12);
      continue;
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec3& r : region) nearest = std::min(nearest, (r - c.skull.vertices[i]).norm());
    if (nearest > 5.0) ASSERT_EQ(d.norm(), 0.0);
    else ASSERT_LE(d.norm(), 4.0 + 1e-12);
  }
}

TEST(Generator, WriteCaseLayout) {
  const synth::SynthCase& c = testing::corpus(2).front();
  const auto root = testing::scratch_dir("synth_case");
  const auto dir = synth::write_case(c, root);
  for (const char* f : {"face_scan.ply", "skull_ct.ply", "landmarks.json", "ground_truth/face.ply",
                        "ground_truth/skull.ply", "ground_truth/params.json",
                        "ground_truth/thickness.bin", "ground_truth/correspondence.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_mesh(dir / "face_scan.ply").vertices, c.face_scan.vertices);
}

}  // namespace
}  // namespace cranio
