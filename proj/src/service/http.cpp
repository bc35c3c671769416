// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/service/http.hpp"

#include "cranio/geometry/mesh_io.hpp"

#include <httplib.h>

#include <cstdlib>
#include <functional>

namespace cranio {

namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, const ApiError& e) {
  res.status = e.status();
  res.set_content(e.body().dump(), kJson);
}

/// Runs `fn` and turns any exception into the structured error body.
void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    send_error(res, to_api_error(e));
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ApiError(400, "bad_request", "request body is not valid JSON", {{"parser", e.what()}});
  }
}

bool wants_ply(const httplib::Request& req) {
  if (req.get_param_value("format") == "ply") return true;
  const std::string accept = req.get_header_value("Accept");
  return accept.find("application/octet-stream") != std::string::npos ||
         accept.find("application/x-ply") != std::string::npos;
}

}  // namespace

void install_routes(httplib::Server& server, PlanningService& service) {
  server.Post("/api/cases", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const nlohmann::json body = parse_body(req);
      if (!body.is_object() || !body.contains("face") || !body.contains("skull")) {
        throw ApiError(400, "bad_request", "case needs face and skull meshes");
      }
      for (const auto& [key, value] : body.items()) {
        if (key != "face" && key != "skull" && key != "landmarks") {
          throw ApiError(400, "bad_request", "unknown case key '" + key + "'");
        }
      }
      const TemplateSet& t = service.templates();
      const TriMesh face = mesh_from_json(body.at("face"), t.face.faces);
      const TriMesh skull = mesh_from_json(body.at("skull"), t.skull.faces);
      std::map<std::string, Vec3> landmarks;
      if (body.contains("landmarks")) {
        const auto& lj = body.at("landmarks");
        if (!lj.is_object()) throw ApiError(400, "bad_request", "landmarks must map names to [x, y, z]");
        for (const auto& [name, p] : lj.items()) {
          if (!p.is_array() || p.size() != 3) {
            throw ApiError(400, "bad_request", "landmark '" + name + "' must be [x, y, z]");
          }
          landmarks[name] = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        }
      }
      const std::string id = service.create_case(face, skull, landmarks);
      res.status = 201;
      res.set_content(nlohmann::json{{"id", id}, {"status", "pending"}}.dump(), kJson);
    });
  });

  server.Get(R"(/api/cases/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(service.case_info(req.matches[1]).dump(), kJson); });
  });

  server.Get(R"(/api/cases/([^/]+)/mesh)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string which = req.has_param("which") ? req.get_param_value("which") : "face";
      const TriMesh mesh = service.case_mesh(req.matches[1], which);
      if (wants_ply(req)) {
        res.set_content(to_ply_bytes(mesh), "application/x-ply");
      } else {
        res.set_content(mesh_to_json(mesh).dump(), kJson);
      }
    });
  });

  server.Post(R"(/api/cases/([^/]+)/plans)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string case_id = req.matches[1];
      const std::string id = service.submit_plan(case_id, parse_body(req));
      res.status = 201;
      res.set_content(nlohmann::json{{"id", id}, {"case_id", case_id}}.dump(), kJson);
    });
  });

  server.Get(R"(/api/plans/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(service.plan_info(req.matches[1]).dump(), kJson); });
  });

  server.Get(R"(/api/plans/([^/]+)/predict)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(service.predict(req.matches[1]), kJson); });
  });

  server.Get(R"(/api/plans/([^/]+)/morph)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("t")) throw ApiError(400, "bad_parameter", "missing query parameter t");
      const std::string text = req.get_param_value("t");
      char* end = nullptr;
      const double t = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size()) {
        throw ApiError(400, "bad_parameter", "t is not a number: '" + text + "'");
      }
      res.set_content(service.morph(req.matches[1], t), kJson);
    });
  });

  server.Get("/api/templates/regions", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(service.regions().dump(), kJson); });
  });

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "http_error";
    send_error(res, ApiError(res.status, code, "no route for " + req.method + " " + req.path));
  });
}

}  // namespace cranio
