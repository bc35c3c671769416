// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/eval/metrics.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/service/http.hpp"
#include "cranio/service/service.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <thread>

namespace cranio {
namespace {

using nlohmann::json;

json affine_json(const Affine34& a) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({a(r, 0), a(r, 1), a(r, 2), a(r, 3)});
  return rows;
}

json transforms_plan(const std::string& region, const Affine34& a) {
  return {{"transforms", {{region, affine_json(a)}}}};
}

std::vector<Vec3> vertices_of(const json& mesh) {
  const auto v = mesh.at("vertices").get<std::vector<double>>();
  std::vector<Vec3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return out;
}

// One shared service with a ready case; preparing a case casts all tissue rays.
class ServiceFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new std::filesystem::path(testing::scratch_dir("service"));
    service_ = new PlanningService(testing::template_set(), *root_);
    const synth::SynthCase& c = testing::corpus(2).front();
    case_id_ = new std::string(service_->create_case(c.face, c.skull, {}));
    ASSERT_EQ(service_->wait_case(*case_id_), "ready");
  }
  static void TearDownTestSuite() {
    delete service_;
    delete case_id_;
    delete root_;
  }

  static const synth::SynthCase& source() { return testing::corpus(2).front(); }

  static std::filesystem::path* root_;
  static PlanningService* service_;
  static std::string* case_id_;
};

std::filesystem::path* ServiceFixture::root_ = nullptr;
PlanningService* ServiceFixture::service_ = nullptr;
std::string* ServiceFixture::case_id_ = nullptr;

TEST_F(ServiceFixture, CaseInfoReportsReadyAndTissue) {
  const json info = service_->case_info(*case_id_);
  EXPECT_EQ(info.at("status"), "ready");
  EXPECT_EQ(info.at("face_vertices"), source().face.vertices.size());
  EXPECT_EQ(info.at("skull_vertices"), source().skull.vertices.size());
  EXPECT_GT(info.at("tissue").at("valid_fraction").get<double>(), 0.5);
  EXPECT_FALSE(info.at("landmarks").empty());
  EXPECT_EQ(service_->case_mesh(*case_id_, "skull").vertices, source().skull.vertices);
}

TEST_F(ServiceFixture, WrongVertexCountIsRejectedWithCounts) {
  TriMesh face = source().face;
  face.vertices.pop_back();
  try {
    service_->create_case(face, source().skull, {});
    FAIL() << "expected an ApiError";
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 422);
    EXPECT_EQ(e.code(), "topology_mismatch");
    EXPECT_FALSE(e.detail().empty());
    EXPECT_NE(e.detail().dump().find(std::to_string(face.vertices.size())), std::string::npos);
  }
}

TEST_F(ServiceFixture, IdentityPlanLeavesSkullUnchanged) {
  const std::string plan = service_->submit_plan(*case_id_, transforms_plan("mandible", identity_affine()));
  const json info = service_->plan_info(plan);
  EXPECT_EQ(info.at("case_id"), *case_id_);

  const auto t0 = std::chrono::steady_clock::now();
  const json pred = json::parse(service_->predict(plan));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(seconds, 2.0);
  EXPECT_LT(pred.at("displacement_mean").get<double>(), 1.0);
  EXPECT_EQ(pred.at("displacement").size(), source().face.vertices.size());
  EXPECT_TRUE(pred.contains("diagnostics"));
}

TEST_F(ServiceFixture, MandibleAdvanceMovesOnlyRegionAndBand) {
  const TemplateSet& t = testing::template_set();
  Affine34 a = identity_affine();
  a(1, 3) = 4.0;
  const std::string plan_id = service_->submit_plan(*case_id_, transforms_plan("mandible", a));
  const TriMesh plan = load_mesh(*root_ / "plans" / plan_id / "skull_plan.ply");
  const TriMesh& skull = source().skull;
  const int mandible = t.skull_regions.region_index("mandible");
  ASSERT_GE(mandible, 0);

  std::vector<Vec3> region;
  for (std::size_t i = 0; i < skull.vertices.size(); ++i) {
    if (t.skull_regions.vertex_region[i] == mandible) region.push_back(skull.vertices[i]);
  }
  std::size_t moved_outside = 0;
  for (std::size_t i = 0; i < skull.vertices.size(); ++i) {
    const Vec3 d = plan.vertices[i] - skull.vertices[i];
    if (t.skull_regions.vertex_region[i] == mandible) {
      ASSERT_LT((d - Vec3(0, 4, 0)).norm(), 1e-5);
      continue;
    }
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec3& r : region) nearest = std::min(nearest, (r - skull.vertices[i]).norm());
    if (nearest > 5.0 + 1e-6) {
      ASSERT_LT(d.norm(), 1e-5) << i;
    } else if (d.norm() > 1e-5) {
      ++moved_outside;
    }
  }
  EXPECT_GT(moved_outside, 0u);

  const json pred = json::parse(service_->predict(plan_id));
  const synth::PostopTruth truth =
      synth::make_postop_truth(source(), testing::head_templates(), {{"mandible", a}}, 5.0);
  const std::vector<Vec3> after = vertices_of(pred.at("face"));
  EXPECT_LT(nrmse(after, truth.face_after), 2.0);
  EXPECT_LT(nrmse(after, truth.face_after), nrmse(source().face.vertices, truth.face_after));
}

TEST_F(ServiceFixture, MalformedPlansAreRejected) {
  Affine34 a = identity_affine();
  a(0, 3) = std::nan("");
  try {
    service_->submit_plan(*case_id_, transforms_plan("mandible", a));
    FAIL() << "expected an ApiError";
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 422);
  }
  auto status_of = [&](const json& plan) {
    try {
      service_->submit_plan(*case_id_, plan);
    } catch (const ApiError& e) {
      return e.status();
    }
    return 0;
  };
  EXPECT_EQ(status_of(transforms_plan("no_such_region", identity_affine())), 422);
  EXPECT_EQ(status_of(json{{"transforms", json::object()}, {"vertices", json::array()}}), 400);
  EXPECT_EQ(status_of(json{{"vertices", {1.0, 2.0, 3.0}}}), 422);
  EXPECT_EQ(status_of(json{{"transforms", {{"mandible", {{1, 0, 0}}}}}}), 400);
  EXPECT_EQ(status_of(json(nullptr)), 400);
}

TEST_F(ServiceFixture, PredictionIsCachedAndSharedThroughTheStore) {
  Affine34 a = identity_affine();
  a(2, 3) = -2.0;
  const std::string plan = service_->submit_plan(*case_id_, transforms_plan("maxilla", a));
  const std::string first = service_->predict(plan);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(service_->predict(plan), first);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 0.5);

  PlanningService other(testing::template_set(), *root_);
  EXPECT_EQ(other.predict(plan), first);
  EXPECT_EQ(other.case_info(*case_id_).at("status"), "ready");
  EXPECT_EQ(other.morph(plan, 0.25), service_->morph(plan, 0.25));
}

TEST_F(ServiceFixture, MorphEndpointsAreExactAndMidpointIsLinear) {
  Affine34 a = identity_affine();
  a(1, 3) = 3.0;
  const std::string plan = service_->submit_plan(*case_id_, transforms_plan("mandible", a));
  const std::vector<Vec3> predicted = vertices_of(json::parse(service_->predict(plan)).at("face"));
  const std::vector<Vec3>& before = source().face.vertices;

  const json m0 = json::parse(service_->morph(plan, 0.0));
  const json m1 = json::parse(service_->morph(plan, 1.0));
  const json mh = json::parse(service_->morph(plan, 0.5));
  EXPECT_EQ(vertices_of(m0.at("face")), before);
  EXPECT_EQ(vertices_of(m1.at("face")), predicted);
  const std::vector<Vec3> mid = vertices_of(mh.at("face"));
  for (std::size_t i = 0; i < mid.size(); ++i) {
    ASSERT_LT((mid[i] - 0.5 * (before[i] + predicted[i])).norm(), 1e-9);
  }
  for (double t : {-0.1, 1.5, std::nan("")}) {
    try {
      service_->morph(plan, t);
      FAIL() << t;
    } catch (const ApiError& e) {
      EXPECT_EQ(e.status(), 422);
    }
  }
}

TEST_F(ServiceFixture, UnknownIdsAreNotFound) {
  for (const std::string id : {"cffffffffffffffff", "../etc", ""}) {
    try {
      service_->case_info(id);
      FAIL() << id;
    } catch (const ApiError& e) {
      EXPECT_EQ(e.status(), 404);
      EXPECT_EQ(e.body().at("code"), "case_not_found");
    }
  }
  EXPECT_THROW(service_->predict("pffffffffffffffff"), ApiError);
}

TEST_F(ServiceFixture, RegionsListTemplateLabels) {
  const json r = service_->regions();
  std::vector<std::string> names;
  std::size_t total = 0;
  for (const json& e : r.at("regions")) {
    names.push_back(e.at("name"));
    total += e.at("vertices").get<std::size_t>();
  }
  EXPECT_NE(std::find(names.begin(), names.end(), "mandible"), names.end());
  EXPECT_EQ(r.at("vertex_region").size(), testing::template_set().skull.vertices.size());
  EXPECT_LE(total, testing::template_set().skull.vertices.size());
}

TEST(ServiceJson, MeshRoundTrip) {
  const TriMesh m = testing::icosphere(1, 2.0);
  const TriMesh back = mesh_from_json(mesh_to_json(m), {});
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  EXPECT_EQ(mesh_from_json(mesh_to_json(m, false), m.faces).faces, m.faces);
  EXPECT_THROW(mesh_from_json(json{{"vertices", {1.0, 2.0}}}, {}), ApiError);
}

// The same service behind the HTTP routes.
class HttpFixture : public ServiceFixture {
 protected:
  static void SetUpTestSuite() {
    ServiceFixture::SetUpTestSuite();
    server_ = new httplib::Server();
    install_routes(*server_, *service_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = new std::thread([] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    server_->stop();
    thread_->join();
    delete thread_;
    delete server_;
    ServiceFixture::TearDownTestSuite();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  static httplib::Server* server_;
  static std::thread* thread_;
  static int port_;
};

httplib::Server* HttpFixture::server_ = nullptr;
std::thread* HttpFixture::thread_ = nullptr;
int HttpFixture::port_ = 0;

void expect_error_body(const httplib::Result& r, int status) {
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, status);
  const json body = json::parse(r->body);
  EXPECT_TRUE(body.contains("code"));
  EXPECT_TRUE(body.contains("message"));
  EXPECT_TRUE(body.contains("detail"));
}

TEST_F(HttpFixture, CaseLifecycle) {
  httplib::Client c = client();
  const json body = {{"face", mesh_to_json(source().face, false)},
                     {"skull", mesh_to_json(source().skull, false)}};
  const auto created = c.Post("/api/cases", body.dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const std::string id = json::parse(created->body).at("id");
  EXPECT_NE(id, *case_id_);

  const auto again = c.Post("/api/cases", body.dump(), "application/json");
  ASSERT_EQ(again->status, 201);
  EXPECT_NE(json::parse(again->body).at("id"), id);

  const std::string status = json::parse(c.Get("/api/cases/" + id)->body).at("status");
  EXPECT_TRUE(status == "pending" || status == "ready") << status;
  EXPECT_EQ(service_->wait_case(id), "ready");
  EXPECT_EQ(json::parse(c.Get("/api/cases/" + id)->body).at("status"), "ready");
  service_->wait_case(json::parse(again->body).at("id"));
}

TEST_F(HttpFixture, BadCaseBodies) {
  httplib::Client c = client();
  expect_error_body(c.Post("/api/cases", "{not json", "application/json"), 400);
  expect_error_body(c.Post("/api/cases", "null", "application/json"), 400);
  expect_error_body(c.Post("/api/cases", json{{"face", 1}}.dump(), "application/json"), 400);

  TriMesh face = source().face;
  face.vertices.resize(face.vertices.size() - 10);
  const json short_face = {{"face", mesh_to_json(face, false)}, {"skull", mesh_to_json(source().skull, false)}};
  const auto r = c.Post("/api/cases", short_face.dump(), "application/json");
  expect_error_body(r, 422);
  EXPECT_NE(r->body.find(std::to_string(face.vertices.size())), std::string::npos);
}

TEST_F(HttpFixture, MeshEndpoint) {
  httplib::Client c = client();
  const auto j = c.Get("/api/cases/" + *case_id_ + "/mesh?which=skull");
  ASSERT_EQ(j->status, 200);
  const json mesh = json::parse(j->body);
  EXPECT_EQ(vertices_of(mesh), source().skull.vertices);
  EXPECT_EQ(mesh.at("faces").size(), 3 * source().skull.faces.size());

  const auto ply = c.Get("/api/cases/" + *case_id_ + "/mesh?which=face&format=ply");
  ASSERT_EQ(ply->status, 200);
  EXPECT_EQ(ply->body, to_ply_bytes(service_->case_mesh(*case_id_, "face")));
  const auto negotiated =
      c.Get("/api/cases/" + *case_id_ + "/mesh", {{"Accept", "application/octet-stream"}});
  EXPECT_EQ(negotiated->body, ply->body);
  expect_error_body(c.Get("/api/cases/" + *case_id_ + "/mesh?which=brain"), 400);
}

TEST_F(HttpFixture, PlanPredictMorph) {
  httplib::Client c = client();
  const auto created = c.Post("/api/cases/" + *case_id_ + "/plans",
                              transforms_plan("mandible", identity_affine()).dump(), "application/json");
  ASSERT_EQ(created->status, 201);
  const std::string plan = json::parse(created->body).at("id");

  const auto p1 = c.Get("/api/plans/" + plan + "/predict");
  ASSERT_EQ(p1->status, 200);
  EXPECT_LT(json::parse(p1->body).at("displacement_mean").get<double>(), 1.0);
  EXPECT_EQ(c.Get("/api/plans/" + plan + "/predict")->body, p1->body);

  const json m0 = json::parse(c.Get("/api/plans/" + plan + "/morph?t=0")->body);
  EXPECT_EQ(vertices_of(m0.at("face")), source().face.vertices);
  const json m1 = json::parse(c.Get("/api/plans/" + plan + "/morph?t=1")->body);
  EXPECT_EQ(vertices_of(m1.at("face")), vertices_of(json::parse(p1->body).at("face")));

  expect_error_body(c.Get("/api/plans/" + plan + "/morph?t=2"), 422);
  expect_error_body(c.Get("/api/plans/" + plan + "/morph"), 400);
  expect_error_body(c.Get("/api/plans/" + plan + "/morph?t=abc"), 400);
}

TEST_F(HttpFixture, PlanValidationOverHttp) {
  httplib::Client c = client();
  const std::string url = "/api/cases/" + *case_id_ + "/plans";
  expect_error_body(c.Post(url, "{\"transforms\": {\"mandible\": [[NaN, 0, 0, 0]]}}", "application/json"), 400);
  expect_error_body(c.Post(url, "null", "application/json"), 400);
  expect_error_body(c.Post(url, transforms_plan("nose", identity_affine()).dump(), "application/json"), 422);
}

TEST_F(HttpFixture, UnknownIdsAndRoutes) {
  httplib::Client c = client();
  const auto r = c.Get("/api/cases/cffffffffffffffff");
  expect_error_body(r, 404);
  EXPECT_EQ(json::parse(r->body).at("code"), "case_not_found");
  expect_error_body(c.Get("/api/plans/pffffffffffffffff/predict"), 404);
  expect_error_body(c.Get("/api/plans/pffffffffffffffff/morph?t=0.5"), 404);
  expect_error_body(c.Get("/api/nowhere"), 404);
}

TEST_F(HttpFixture, RegionsEndpoint) {
  httplib::Client c = client();
  const auto r = c.Get("/api/templates/regions");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body), service_->regions());
}

}  // namespace
}  // namespace cranio
