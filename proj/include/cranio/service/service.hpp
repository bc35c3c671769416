// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/error.hpp"
#include "cranio/eval/config.hpp"
#include "cranio/fitting/fitting.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

namespace cranio {

/// Failure with an HTTP status and a stable machine-readable code. Bodies
/// are {code, message, detail}.
class ApiError : public Error {
 public:
  ApiError(int status, std::string code, const std::string& message,
           nlohmann::json detail = nlohmann::json::object())
      : Error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const nlohmann::json& detail() const { return detail_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json detail_;
};

/// Maps any library exception onto an ApiError.
ApiError to_api_error(const std::exception& e);

/// Flat JSON wire format: {"vertices": [x0, y0, z0, ...], "faces": [a0, b0, c0, ...]}.
nlohmann::json mesh_to_json(const TriMesh& mesh, bool with_faces = true);
/// Missing "faces" takes `default_faces`.
TriMesh mesh_from_json(const nlohmann::json& j, const std::vector<Face>& default_faces);

/// Case and plan store with prediction caching. Cases and plans live in
/// <root>/cases/<id>/ and <root>/plans/<id>/ and are loaded on demand, so
/// several services may share one root.
class PlanningService {
 public:
  PlanningService(TemplateSet templates, std::filesystem::path root,
                  SurgeryConfig config = {}, std::shared_ptr<const TmmModel> tmm = nullptr);
  ~PlanningService();

  PlanningService(const PlanningService&) = delete;
  PlanningService& operator=(const PlanningService&) = delete;

  /// Persists the case and starts the tissue precomputation in the
  /// background. Returns the new id; status starts as "pending".
  std::string create_case(const TriMesh& face, const TriMesh& skull,
                          const std::map<std::string, Vec3>& landmarks);
  nlohmann::json case_info(const std::string& id);
  /// Blocks until the case leaves "pending"; returns the final status.
  std::string wait_case(const std::string& id);
  TriMesh case_mesh(const std::string& id, const std::string& which);

  /// `edit` holds either "transforms" (region -> 3x4 row-major matrix) or
  /// "vertices" (flat planned skull coordinates).
  std::string submit_plan(const std::string& case_id, const nlohmann::json& edit);
  nlohmann::json plan_info(const std::string& plan_id);

  /// Serialized prediction payload, computed once per plan.
  std::string predict(const std::string& plan_id);
  std::string morph(const std::string& plan_id, double t);

  nlohmann::json regions() const;
  const TemplateSet& templates() const { return templates_; }

 private:
  struct CaseRecord {
    std::string id;
    std::string created_at;
    TriMesh face;
    TriMesh skull;
    std::map<std::string, Vec3> landmarks;
    std::mutex plan_mutex;
    std::mutex state_mutex;
    std::condition_variable_any state_changed;
    std::string status;
    std::string error;
    std::optional<SurgeryTransport> transport;
  };
  struct PlanRecord {
    std::string id;
    std::string case_id;
    nlohmann::json edit;
    TriMesh skull_plan;
    std::mutex predict_mutex;
    std::optional<std::string> payload;
    std::optional<PredictionResult> prediction;
  };

  std::shared_ptr<CaseRecord> find_case(const std::string& id);
  std::shared_ptr<PlanRecord> find_plan(const std::string& id);
  std::shared_ptr<CaseRecord> ready_case(const std::string& id);
  void compute_transport(std::shared_ptr<CaseRecord> c);
  void write_case_meta(const CaseRecord& c);
  const PredictionResult& prediction_of(PlanRecord& plan);
  std::string new_id(const std::filesystem::path& parent, const std::string& prefix);

  TemplateSet templates_;
  std::filesystem::path root_;
  SurgeryConfig config_;
  std::shared_ptr<const TmmModel> tmm_;

  std::shared_mutex maps_mutex_;
  std::map<std::string, std::shared_ptr<CaseRecord>> cases_;
  std::map<std::string, std::shared_ptr<PlanRecord>> plans_;

  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

}  // namespace cranio
