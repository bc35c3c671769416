// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/service/service.hpp"

#include "cranio/geometry/mesh_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace cranio {

namespace fs = std::filesystem;

nlohmann::json ApiError::body() const {
  return {{"code", code_}, {"message", what()}, {"detail", detail_}};
}

ApiError to_api_error(const std::exception& e) {
  if (const auto* a = dynamic_cast<const ApiError*>(&e)) return *a;
  if (dynamic_cast<const ParseError*>(&e)) return ApiError(400, "parse_error", e.what());
  if (dynamic_cast<const ValidationError*>(&e)) return ApiError(422, "validation_error", e.what());
  if (dynamic_cast<const NumericalError*>(&e)) return ApiError(500, "numerical_error", e.what());
  if (dynamic_cast<const IoError*>(&e)) return ApiError(500, "io_error", e.what());
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return ApiError(400, "bad_request", e.what());
  return ApiError(500, "internal_error", e.what());
}

namespace {

std::vector<double> finite_array(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ApiError(400, "bad_request", std::string(what) + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw ApiError(400, "bad_request", std::string(what) + " must hold numbers");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ApiError(422, "non_finite", std::string(what) + " has a non-finite value");
    out.push_back(x);
  }
  return out;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char ch) {
           return std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
         });
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

/// Write to a sibling temporary, then rename, so readers never see partial files.
void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << bytes;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void check_topology(const TriMesh& mesh, const TriMesh& reference, const std::string& which) {
  if (mesh.vertices.size() != reference.vertices.size()) {
    throw ApiError(422, "topology_mismatch",
                   which + " has " + std::to_string(mesh.vertices.size()) +
                       " vertices, template has " + std::to_string(reference.vertices.size()),
                   {{"mesh", which},
                    {"expected_vertices", reference.vertices.size()},
                    {"actual_vertices", mesh.vertices.size()}});
  }
  if (mesh.faces != reference.faces) {
    throw ApiError(422, "topology_mismatch", which + " faces differ from the template",
                   {{"mesh", which},
                    {"expected_faces", reference.faces.size()},
                    {"actual_faces", mesh.faces.size()}});
  }
}

void save_index_map(const IndexMap& m, const fs::path& path) {
  write_atomic(path, nlohmann::json{{"index", m.index}, {"fallback", m.fallback}}.dump());
}

IndexMap load_index_map(const fs::path& path) {
  const nlohmann::json j = read_json(path);
  IndexMap m;
  m.index = j.at("index").get<std::vector<int>>();
  m.fallback = j.at("fallback").get<std::vector<std::uint8_t>>();
  return m;
}

}  // namespace

nlohmann::json mesh_to_json(const TriMesh& mesh, bool with_faces) {
  std::vector<double> v;
  v.reserve(3 * mesh.vertices.size());
  for (const Vec3& p : mesh.vertices) v.insert(v.end(), {p.x(), p.y(), p.z()});
  nlohmann::json j = {{"vertices", std::move(v)}};
  if (with_faces) {
    std::vector<int> f;
    f.reserve(3 * mesh.faces.size());
    for (const Face& t : mesh.faces) f.insert(f.end(), {t[0], t[1], t[2]});
    j["faces"] = std::move(f);
  }
  return j;
}

TriMesh mesh_from_json(const nlohmann::json& j, const std::vector<Face>& default_faces) {
  if (!j.is_object() || !j.contains("vertices")) {
    throw ApiError(400, "bad_request", "mesh must be an object with a vertices array");
  }
  const std::vector<double> v = finite_array(j.at("vertices"), "vertices");
  if (v.size() % 3 != 0) throw ApiError(400, "bad_request", "vertex array length is not a multiple of 3");
  TriMesh mesh;
  mesh.vertices.resize(v.size() / 3);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    mesh.vertices[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  }
  if (j.contains("faces")) {
    const auto& f = j.at("faces");
    if (!f.is_array() || f.size() % 3 != 0) {
      throw ApiError(400, "bad_request", "faces must be a flat array of index triples");
    }
    mesh.faces.resize(f.size() / 3);
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
      for (int k = 0; k < 3; ++k) mesh.faces[i][k] = f.at(3 * i + static_cast<std::size_t>(k)).get<int>();
    }
  } else {
    mesh.faces = default_faces;
  }
  return mesh;
}

PlanningService::PlanningService(TemplateSet templates, fs::path root, SurgeryConfig config,
                                 std::shared_ptr<const TmmModel> tmm)
    : templates_(std::move(templates)), root_(std::move(root)), config_(std::move(config)),
      tmm_(std::move(tmm)) {
  templates_.validate();
  if (config_.predict.regularize_tissue && !tmm_) {
    throw ValidationError("tissue regularization needs a tissue model");
  }
  fs::create_directories(root_ / "cases");
  fs::create_directories(root_ / "plans");
}

PlanningService::~PlanningService() {
  const std::lock_guard lock(workers_mutex_);
  for (std::thread& t : workers_) {
    if (t.joinable()) t.join();
  }
}

std::string PlanningService::new_id(const fs::path& parent, const std::string& prefix) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    std::ostringstream id;
    id << prefix << std::hex << std::setw(16) << std::setfill('0') << rng();
    // create_directory is atomic: only one caller gets true for a given id.
    if (fs::create_directory(parent / id.str())) return id.str();
  }
}

void PlanningService::write_case_meta(const CaseRecord& c) {
  nlohmann::json j = {{"id", c.id},
                      {"created_at", c.created_at},
                      {"status", c.status},
                      {"face_vertices", c.face.vertices.size()},
                      {"skull_vertices", c.skull.vertices.size()}};
  if (!c.error.empty()) j["error"] = c.error;
  write_atomic(root_ / "cases" / c.id / "case.json", j.dump(2));
}

std::string PlanningService::create_case(const TriMesh& face, const TriMesh& skull,
                                         const std::map<std::string, Vec3>& landmarks) {
  check_topology(face, templates_.face, "face");
  check_topology(skull, templates_.skull, "skull");
  for (const auto& [name, p] : landmarks) {
    if (!p.allFinite()) throw ApiError(422, "non_finite", "landmark '" + name + "' is not finite");
  }
  auto c = std::make_shared<CaseRecord>();
  c->id = new_id(root_ / "cases", "c");
  c->created_at = utc_now();
  c->face = face;
  c->skull = skull;
  c->landmarks = landmarks.empty() ? templates_.face_landmarks.on_mesh(face).positions() : landmarks;
  c->status = "pending";
  const fs::path dir = root_ / "cases" / c->id;
  save_mesh(c->face, dir / "face.ply");
  save_mesh(c->skull, dir / "skull.ply");
  save_landmark_positions(c->landmarks, dir / "landmarks.json");
  write_case_meta(*c);
  {
    const std::unique_lock lock(maps_mutex_);
    cases_[c->id] = c;
  }
  {
    const std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, c] { compute_transport(c); });
  }
  return c->id;
}

void PlanningService::compute_transport(std::shared_ptr<CaseRecord> c) {
  std::optional<SurgeryTransport> t;
  std::string error;
  try {
    t = prepare_transport(c->face, c->skull, templates_.face_landmarks, config_.predict.n_q);
    const fs::path dir = root_ / "cases" / c->id;
    save_hitset(t->hits, dir / "tissue.bin");
    save_index_map(t->anchors, dir / "index_map.json");
  } catch (const std::exception& e) {
    t.reset();
    error = e.what();
  }
  const std::lock_guard lock(c->state_mutex);
  c->transport = std::move(t);
  c->status = error.empty() ? "ready" : "failed";
  c->error = error;
  write_case_meta(*c);
  c->state_changed.notify_all();
}

std::shared_ptr<PlanningService::CaseRecord> PlanningService::find_case(const std::string& id) {
  if (!valid_id(id)) throw ApiError(404, "case_not_found", "no case '" + id + "'");
  {
    const std::shared_lock lock(maps_mutex_);
    if (auto it = cases_.find(id); it != cases_.end()) return it->second;
  }
  const fs::path dir = root_ / "cases" / id;
  if (!fs::exists(dir / "case.json")) throw ApiError(404, "case_not_found", "no case '" + id + "'");
  const nlohmann::json meta = read_json(dir / "case.json");
  auto c = std::make_shared<CaseRecord>();
  c->id = id;
  c->created_at = meta.value("created_at", "");
  c->face = load_mesh(dir / "face.ply");
  c->skull = load_mesh(dir / "skull.ply");
  c->landmarks = load_landmark_positions(dir / "landmarks.json");
  c->status = meta.value("status", "pending");
  c->error = meta.value("error", "");
  bool restart = c->status == "pending";
  if (c->status == "ready") {
    SurgeryTransport t;
    t.n_q = config_.predict.n_q;
    t.hits = load_hitset(dir / "tissue.bin");
    t.anchors = load_index_map(dir / "index_map.json");
    if (t.hits.size() != c->face.vertices.size() * static_cast<std::size_t>(t.n_q)) {
      // Stored rays were cast with a different n_q; recompute.
      c->status = "pending";
      restart = true;
    } else {
      t.valid_fraction = static_cast<double>(t.hits.valid_count()) / static_cast<double>(t.hits.size());
      c->transport = std::move(t);
    }
  }
  std::shared_ptr<CaseRecord> result;
  {
    const std::unique_lock lock(maps_mutex_);
    auto [it, inserted] = cases_.emplace(id, c);
    result = it->second;
    restart = restart && inserted;
  }
  if (restart) {
    const std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, result] { compute_transport(result); });
  }
  return result;
}

std::shared_ptr<PlanningService::CaseRecord> PlanningService::ready_case(const std::string& id) {
  auto c = find_case(id);
  const std::lock_guard lock(c->state_mutex);
  if (c->status == "pending") {
    throw ApiError(409, "case_not_ready", "case '" + id + "' is still being prepared");
  }
  if (c->status != "ready") {
    throw ApiError(409, "case_failed", "case '" + id + "' failed preparation", {{"error", c->error}});
  }
  return c;
}

nlohmann::json PlanningService::case_info(const std::string& id) {
  auto c = find_case(id);
  nlohmann::json landmarks = nlohmann::json::object();
  for (const auto& [name, p] : c->landmarks) landmarks[name] = {p.x(), p.y(), p.z()};
  nlohmann::json j = {{"id", c->id},
                      {"created_at", c->created_at},
                      {"face_vertices", c->face.vertices.size()},
                      {"skull_vertices", c->skull.vertices.size()},
                      {"landmarks", landmarks}};
  const std::lock_guard lock(c->state_mutex);
  j["status"] = c->status;
  if (!c->error.empty()) j["error"] = c->error;
  if (c->transport) {
    j["tissue"] = {{"n_q", c->transport->n_q},
                   {"rays", c->transport->hits.size()},
                   {"valid_rays", c->transport->hits.valid_count()},
                   {"valid_fraction", c->transport->valid_fraction}};
  }
  return j;
}

std::string PlanningService::wait_case(const std::string& id) {
  auto c = find_case(id);
  std::unique_lock lock(c->state_mutex);
  c->state_changed.wait(lock, [&] { return c->status != "pending"; });
  return c->status;
}

TriMesh PlanningService::case_mesh(const std::string& id, const std::string& which) {
  auto c = find_case(id);
  if (which == "face") return c->face;
  if (which == "skull") return c->skull;
  throw ApiError(400, "bad_parameter", "which must be face or skull, got '" + which + "'");
}

std::string PlanningService::submit_plan(const std::string& case_id, const nlohmann::json& edit) {
  auto c = ready_case(case_id);
  if (!edit.is_object()) throw ApiError(400, "bad_request", "plan must be a JSON object");
  for (const auto& [key, value] : edit.items()) {
    if (key != "transforms" && key != "vertices") {
      throw ApiError(400, "bad_request", "unknown plan key '" + key + "'");
    }
  }
  const bool has_t = edit.contains("transforms");
  const bool has_v = edit.contains("vertices");
  if (has_t == has_v) {
    throw ApiError(400, "bad_request", "plan needs exactly one of transforms or vertices");
  }

  TriMesh plan = c->skull;
  if (has_t) {
    const auto& tj = edit.at("transforms");
    if (!tj.is_object()) throw ApiError(400, "bad_request", "transforms must map region names to matrices");
    std::map<std::string, Affine34> transforms;
    for (const auto& [name, m] : tj.items()) {
      if (templates_.skull_regions.region_index(name) < 0) {
        throw ApiError(422, "unknown_region", "unknown region '" + name + "'",
                       {{"region", name}, {"known", templates_.skull_regions.names}});
      }
      if (!m.is_array() || m.size() != 3) {
        throw ApiError(400, "bad_request", "transform for '" + name + "' must be 3 rows of 4 numbers");
      }
      Affine34 a;
      for (int r = 0; r < 3; ++r) {
        const std::vector<double> row = finite_array(m.at(static_cast<std::size_t>(r)), "transform row");
        if (row.size() != 4) {
          throw ApiError(400, "bad_request", "transform for '" + name + "' must be 3 rows of 4 numbers");
        }
        for (int k = 0; k < 4; ++k) a(r, k) = row[static_cast<std::size_t>(k)];
      }
      transforms[name] = a;
    }
    plan = make_surgery_plan(c->skull, templates_.skull_regions, transforms, config_.band_mm).skull_plan;
  } else {
    const std::vector<double> v = finite_array(edit.at("vertices"), "vertices");
    if (v.size() != 3 * plan.vertices.size()) {
      throw ApiError(422, "topology_mismatch",
                     "planned skull has " + std::to_string(v.size() / 3) + " vertices, case has " +
                         std::to_string(plan.vertices.size()),
                     {{"expected_vertices", plan.vertices.size()}, {"actual_vertices", v.size() / 3}});
    }
    for (std::size_t i = 0; i < plan.vertices.size(); ++i) {
      plan.vertices[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
    }
  }

  const std::lock_guard serialize(c->plan_mutex);
  auto p = std::make_shared<PlanRecord>();
  p->id = new_id(root_ / "plans", "p");
  p->case_id = case_id;
  p->edit = edit;
  p->skull_plan = std::move(plan);
  const fs::path dir = root_ / "plans" / p->id;
  save_mesh(p->skull_plan, dir / "skull_plan.ply");
  write_atomic(dir / "plan.json",
               nlohmann::json{{"id", p->id}, {"case_id", case_id}, {"created_at", utc_now()}, {"edit", edit}}
                   .dump(2));
  const std::unique_lock lock(maps_mutex_);
  plans_[p->id] = p;
  return p->id;
}

std::shared_ptr<PlanningService::PlanRecord> PlanningService::find_plan(const std::string& id) {
  if (!valid_id(id)) throw ApiError(404, "plan_not_found", "no plan '" + id + "'");
  {
    const std::shared_lock lock(maps_mutex_);
    if (auto it = plans_.find(id); it != plans_.end()) return it->second;
  }
  const fs::path dir = root_ / "plans" / id;
  if (!fs::exists(dir / "plan.json")) throw ApiError(404, "plan_not_found", "no plan '" + id + "'");
  const nlohmann::json meta = read_json(dir / "plan.json");
  auto p = std::make_shared<PlanRecord>();
  p->id = id;
  p->case_id = meta.at("case_id").get<std::string>();
  p->edit = meta.at("edit");
  p->skull_plan = load_mesh(dir / "skull_plan.ply");
  const std::unique_lock lock(maps_mutex_);
  return plans_.emplace(id, p).first->second;
}

nlohmann::json PlanningService::plan_info(const std::string& plan_id) {
  auto p = find_plan(plan_id);
  return {{"id", p->id}, {"case_id", p->case_id}, {"edit", p->edit}};
}

std::string PlanningService::predict(const std::string& plan_id) {
  auto p = find_plan(plan_id);
  const std::lock_guard lock(p->predict_mutex);
  if (p->payload) return *p->payload;
  const fs::path cached = root_ / "plans" / p->id / "prediction.json";
  if (fs::exists(cached)) {
    p->payload = read_text(cached);
    return *p->payload;
  }
  auto c = ready_case(p->case_id);
  PredictionResult r = predict_surgery(c->face, c->skull, p->skull_plan, *c->transport, tmm_.get(),
                                       config_.predict);
  double max_d = 0.0;
  double sum_d = 0.0;
  for (double d : r.displacement) {
    max_d = std::max(max_d, d);
    sum_d += d;
  }
  nlohmann::json j = {{"plan_id", p->id},
                      {"case_id", p->case_id},
                      {"face", mesh_to_json(r.face, false)},
                      {"displacement", r.displacement},
                      {"displacement_max", max_d},
                      {"displacement_mean", sum_d / static_cast<double>(r.displacement.size())},
                      {"diagnostics", r.diagnostics}};
  if (r.tissue) {
    j["tissue"] = {{"ti", std::vector<double>(r.tissue->ti.data(), r.tissue->ti.data() + r.tissue->ti.size())},
                   {"scale", r.tissue->scale}};
  }
  std::string bytes = j.dump();
  write_atomic(cached, bytes);
  p->prediction = std::move(r);
  p->payload = std::move(bytes);
  return *p->payload;
}

std::string PlanningService::morph(const std::string& plan_id, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ApiError(422, "bad_parameter", "t must lie in [0, 1]", {{"t", std::isfinite(t) ? nlohmann::json(t) : nlohmann::json(nullptr)}});
  }
  auto p = find_plan(plan_id);
  const nlohmann::json payload = nlohmann::json::parse(predict(plan_id));
  auto c = find_case(p->case_id);
  TriMesh after = mesh_from_json(payload.at("face"), c->face.faces);
  const MorphFrame f = interpolate_morph(c->face, after, t);
  nlohmann::json j = {{"plan_id", p->id},
                      {"case_id", p->case_id},
                      {"t", t},
                      {"face", mesh_to_json(f.mesh, false)},
                      {"displacement", f.displacement}};
  return j.dump();
}

nlohmann::json PlanningService::regions() const {
  const RegionLabels& r = templates_.skull_regions;
  std::vector<std::size_t> counts(r.names.size(), 0);
  for (int v : r.vertex_region) {
    if (v >= 0) ++counts[static_cast<std::size_t>(v)];
  }
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    list.push_back({{"name", r.names[i]}, {"vertices", counts[i]}});
  }
  return {{"regions", list}, {"vertex_region", r.vertex_region}, {"band_mm", config_.band_mm}};
}

}  // namespace cranio
