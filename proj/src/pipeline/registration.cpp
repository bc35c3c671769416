// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/pipeline/registration.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/laplacian.hpp"
#include "cranio/geometry/mesh_io.hpp"
#include "cranio/util/hash.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace cranio {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, false, e.what());
  }
}

const Vec3& require(const std::map<std::string, Vec3>& lm, const char* name) {
  auto it = lm.find(name);
  if (it == lm.end()) throw ValidationError(std::string("missing landmark '") + name + "'");
  return it->second;
}

}  // namespace

InitialFitResult initial_face_fit(const TriMesh& face_template, const LandmarkSet& template_landmarks,
                                  const std::map<std::string, Vec3>& target_landmarks,
                                  const TriMesh& target, const DeformConfig& deform_config) {
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  for (const Landmark& l : template_landmarks.items()) {
    auto it = target_landmarks.find(l.name);
    if (it == target_landmarks.end()) continue;
    src.push_back(face_template.vertices.at(l.vertex));
    dst.push_back(it->second);
  }
  if (src.size() < kMinInitLandmarks) {
    throw ValidationError("initial fit needs at least " + std::to_string(kMinInitLandmarks) +
                          " shared landmarks, found " + std::to_string(src.size()));
  }
  InitialFitResult out;
  out.landmarks_used = src.size();
  out.similarity = fit_similarity(src, dst);
  out.mesh = out.similarity.apply(face_template);
  if (deform_config.iterations == 0) return out;

  // Spread the landmark residuals smoothly before the deformation pass;
  // the optimizer alone propagates them only a few rings per step.
  std::vector<int> anchors;
  std::vector<Vec3> residuals;
  for (const Landmark& l : template_landmarks.items()) {
    auto it = target_landmarks.find(l.name);
    if (it == target_landmarks.end()) continue;
    anchors.push_back(l.vertex);
    residuals.push_back(it->second - out.mesh.vertices[l.vertex]);
  }
  const std::vector<Vec3> shift =
      smooth_interpolate(out.mesh, anchors, residuals, 1e3, deform_config.weighting);
  for (std::size_t i = 0; i < shift.size(); ++i) out.mesh.vertices[i] += shift[i];

  ControlPairs controls;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    controls.source.push_back(out.mesh.vertices[anchors[k]]);
    controls.target.push_back(dst[k]);
  }
  const SpatialIndex index(target);
  out.mesh = deform(out.mesh, &index, controls, deform_config).mesh;
  return out;
}

FaceRegistration register_face(const TriMesh& initial, const TriMesh& scan,
                               const DeformConfig& config, const NormalMatchOptions& match) {
  const SpatialIndex index(scan);
  FaceRegistration out;
  out.match = normal_ray_match(initial, index, match);
  ControlPairs controls;
  for (std::size_t i = 0; i < out.match.source.size(); ++i) {
    if (out.match.fallback[i]) continue;
    controls.source.push_back(out.match.source[i]);
    controls.target.push_back(out.match.target[i]);
  }
  out.controls = controls.size();
  out.deform = deform(initial, &index, controls, config);
  out.mesh = out.deform.mesh;
  return out;
}

std::vector<Vec3> psi_map(const std::map<std::string, Vec3>& lm, int n_q) {
  if (n_q < 1) throw ValidationError("need at least one ray endpoint");
  const Vec3 origin = 0.5 * (require(lm, "tragion_left") + require(lm, "tragion_right"));
  const Vec3 eyes = 0.5 * (require(lm, "eye_outer_left") + require(lm, "eye_outer_right"));
  const Vec3& chin = require(lm, "menton");
  const Vec3& nose = require(lm, "nose_tip");

  const Vec3 up = (eyes - chin).normalized();
  const Vec3 forward = nose - origin;
  const Vec3 back = -(forward - forward.dot(up) * up).normalized();
  const double depth = forward.norm();
  if (!(depth > 0.0) || !back.allFinite() || !up.allFinite()) {
    throw ValidationError("degenerate landmark frame for ray endpoints");
  }
  std::vector<Vec3> q;
  for (int k = 0; k < n_q; ++k) {
    const double f = n_q == 1 ? 0.8 : 0.6 + 0.4 * k / (n_q - 1);
    const double angle = n_q == 1 ? 0.0 : (-15.0 + 30.0 * k / (n_q - 1)) * kDeg;
    q.push_back(origin + f * depth * (std::cos(angle) * back + std::sin(angle) * up));
  }
  return q;
}

std::vector<Vec3> psi_map(const TriMesh& face, const LandmarkSet& template_landmarks, int n_q) {
  return psi_map(template_landmarks.on_mesh(face).positions(), n_q);
}

SkullRegistration register_skull(const TriMesh& face, const TriMesh& skull_ct,
                                 const TriMesh& face_template, const TriMesh& skull_template,
                                 const LandmarkSet& face_landmarks, const DeformConfig& config,
                                 const SkullRayOptions& rays) {
  if (!face.same_topology(face_template)) {
    throw ValidationError("registered face does not have the face template topology");
  }
  const std::vector<Vec3> q_subject = psi_map(face, face_landmarks, rays.n_q);
  const std::vector<Vec3> q_template = psi_map(face_template, face_landmarks, rays.n_q);
  const RayBundle r_subject = build_skull_rays(face, q_subject, rays.origin_stride);
  const RayBundle r_template = build_skull_rays(face_template, q_template, rays.origin_stride);

  const SpatialIndex ct_index(skull_ct);
  SkullRegistration out;
  out.subject_hits = psi_hit(r_subject, ct_index);
  out.template_hits = psi_hit(r_template, SpatialIndex(skull_template));

  out.prealign = fit_similarity(face_template.vertices, face.vertices);
  const TriMesh start = out.prealign.apply(skull_template);
  ControlPairs controls;
  for (std::size_t i = 0; i < out.subject_hits.size(); ++i) {
    if (!out.subject_hits.valid(i) || !out.template_hits.valid(i)) continue;
    controls.source.push_back(out.prealign.apply(out.template_hits.point(i)));
    controls.target.push_back(out.subject_hits.point(i));
  }
  out.joint_valid = controls.size();
  if (out.joint_valid < kMinSkullControls) {
    throw ValidationError("only " + std::to_string(out.joint_valid) +
                          " rays hit both skulls; at least " +
                          std::to_string(kMinSkullControls) + " are required");
  }
  out.deform = deform(start, &ct_index, controls, config);
  out.mesh = out.deform.mesh;
  return out;
}

DeformResult register_skull_sparse(const TriMesh& skull_ct, const TriMesh& skull_template,
                                   const LandmarkSet& skull_landmarks,
                                   const std::map<std::string, Vec3>& target_landmarks,
                                   const Similarity& prealign, const DeformConfig& config) {
  const TriMesh start = prealign.apply(skull_template);
  ControlPairs controls;
  for (const Landmark& l : skull_landmarks.items()) {
    auto it = target_landmarks.find(l.name);
    if (it == target_landmarks.end()) continue;
    controls.source.push_back(start.vertices.at(l.vertex));
    controls.target.push_back(it->second);
  }
  const SpatialIndex index(skull_ct);
  return deform(start, &index, controls, config);
}

IndexMap build_index_map(const TriMesh& skull, const HitSet& hits,
                         const std::vector<Vec3>& ray_origins) {
  if (ray_origins.size() != hits.size()) {
    throw ValidationError("ray origins and hits differ in length");
  }
  const PointIndex index(skull.vertices);
  IndexMap map;
  map.index.resize(hits.size());
  map.fallback.assign(hits.size(), 0);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits.valid(i)) {
      map.index[i] = index.nearest(hits.point(i)).index;
    } else {
      map.index[i] = index.nearest(ray_origins[i]).index;
      map.fallback[i] = 1;
    }
  }
  return map;
}

// ---------------------------------------------------------------------------

namespace {

Vec3 mirror(const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); }

TriMesh mirror_mesh(const TriMesh& mesh, const std::vector<int>& sym, const char* what) {
  if (sym.size() != mesh.vertices.size()) {
    throw ValidationError(std::string("missing or mis-sized ") + what + " symmetry map");
  }
  TriMesh out = mesh;
  for (std::size_t i = 0; i < sym.size(); ++i) out.vertices[i] = mirror(mesh.vertices[sym[i]]);
  if (mesh.albedo) {
    for (std::size_t i = 0; i < sym.size(); ++i) (*out.albedo)[i] = (*mesh.albedo)[sym[i]];
  }
  return out;
}

}  // namespace

RegistrationCase flip_augment(const RegistrationCase& c, const std::vector<int>& face_symmetry,
                              const std::vector<int>& skull_symmetry) {
  if (c.origin_stride != 1) throw ValidationError("flip needs every face vertex as a ray origin");
  RegistrationCase out = c;
  out.id = c.id + "_flip";
  out.face = mirror_mesh(c.face, face_symmetry, "face");
  out.skull = mirror_mesh(c.skull, skull_symmetry, "skull");
  const std::size_t n_q = static_cast<std::size_t>(c.n_q);
  if (c.tissue.size() != c.face.vertices.size() * n_q) {
    throw ValidationError("tissue field length does not match the face");
  }
  out.tissue.resize_invalid(c.tissue.size());
  for (std::size_t j = 0; j < face_symmetry.size(); ++j) {
    for (std::size_t k = 0; k < n_q; ++k) {
      const std::size_t src = static_cast<std::size_t>(face_symmetry[j]) * n_q + k;
      const std::size_t dst = j * n_q + k;
      if (!c.tissue.valid(src)) continue;
      out.tissue.points[dst] = mirror(c.tissue.points[src]);
      out.tissue.vectors[dst] = mirror(c.tissue.vectors[src]);
      out.tissue.mask[dst] = 1;
    }
  }
  out.provenance["flipped"] = !c.provenance.value("flipped", false);
  return out;
}

void save_registration(const RegistrationCase& c, const std::filesystem::path& case_dir) {
  const std::filesystem::path dir = case_dir / "registered";
  std::filesystem::create_directories(dir);
  save_mesh(c.face, dir / "face.ply");
  save_mesh(c.skull, dir / "skull.ply");
  save_hitset(c.tissue, dir / "tissue.bin");
  const nlohmann::json meta = {{"id", c.id},
                               {"n_q", c.n_q},
                               {"origin_stride", c.origin_stride},
                               {"face_vertices", c.face.vertices.size()},
                               {"skull_vertices", c.skull.vertices.size()},
                               {"valid_rays", c.tissue.valid_count()},
                               {"provenance", c.provenance}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

RegistrationCase load_registration(const std::filesystem::path& case_dir) {
  const std::filesystem::path dir = case_dir / "registered";
  RegistrationCase c;
  const nlohmann::json meta = read_json(dir / "meta.json");
  try {
    c.id = meta.at("id").get<std::string>();
    c.n_q = meta.at("n_q").get<int>();
    c.origin_stride = meta.at("origin_stride").get<int>();
    c.provenance = meta.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
  c.face = load_mesh(dir / "face.ply");
  c.skull = load_mesh(dir / "skull.ply");
  c.tissue = load_hitset(dir / "tissue.bin");
  return c;
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const RegistrationOptions& o) {
  j = {{"init", o.init},
       {"face", o.face},
       {"skull", o.skull},
       {"match",
        {{"max_distance_fraction", o.match.max_distance_fraction},
         {"min_normal_cosine", o.match.min_normal_cosine}}},
       {"rays", {{"n_q", o.rays.n_q}, {"origin_stride", o.rays.origin_stride}}}};
}

void from_json(const nlohmann::json& j, RegistrationOptions& o) {
  auto check_keys = [](const nlohmann::json& obj, const std::set<std::string>& known,
                       const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
      if (!known.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
    }
  };
  check_keys(j, {"init", "face", "skull", "match", "rays"}, "registration options");
  if (j.contains("init")) from_json(j.at("init"), o.init);
  if (j.contains("face")) from_json(j.at("face"), o.face);
  if (j.contains("skull")) from_json(j.at("skull"), o.skull);
  try {
    if (j.contains("match")) {
      const auto& m = j.at("match");
      check_keys(m, {"max_distance_fraction", "min_normal_cosine"}, "match");
      o.match.max_distance_fraction = m.value("max_distance_fraction", o.match.max_distance_fraction);
      o.match.min_normal_cosine = m.value("min_normal_cosine", o.match.min_normal_cosine);
    }
    if (j.contains("rays")) {
      const auto& r = j.at("rays");
      check_keys(r, {"n_q", "origin_stride"}, "rays");
      o.rays.n_q = r.value("n_q", o.rays.n_q);
      o.rays.origin_stride = r.value("origin_stride", o.rays.origin_stride);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad registration options: ") + e.what());
  }
  if (o.rays.n_q < 1 || o.rays.origin_stride < 1) {
    throw ValidationError("n_q and origin_stride must be positive");
  }
}

std::vector<Vec3> transfer_albedo(const TriMesh& mesh, const TriMesh& source) {
  if (!source.albedo) throw ValidationError("albedo source mesh has no colours");
  const SpatialIndex index(source);
  std::vector<Vec3> out(mesh.vertices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const ClosestPoint cp = index.closest_point(mesh.vertices[i]);
    const Face& f = source.faces[cp.face];
    out[i] = Vec3::Zero();
    for (int k = 0; k < 3; ++k) out[i] += cp.barycentric[k] * (*source.albedo)[f[k]];
  }
  return out;
}

RegistrationReport register_subject(const TemplateSet& templates, const TriMesh& face_scan,
                                    const TriMesh& skull_ct,
                                    const std::map<std::string, Vec3>& face_landmarks,
                                    const RegistrationOptions& options, std::string id) {
  RegistrationReport r;
  r.init = initial_face_fit(templates.face, templates.face_landmarks, face_landmarks, face_scan,
                            options.init);
  r.face = register_face(r.init.mesh, face_scan, options.face, options.match);
  r.skull = register_skull(r.face.mesh, skull_ct, templates.face, templates.skull,
                           templates.face_landmarks, options.skull, options.rays);
  r.registered.id = std::move(id);
  r.registered.face = r.face.mesh;
  if (face_scan.albedo) r.registered.face.albedo = transfer_albedo(r.face.mesh, face_scan);
  r.registered.skull = r.skull.mesh;
  r.registered.tissue = r.skull.subject_hits;
  r.registered.n_q = options.rays.n_q;
  r.registered.origin_stride = options.rays.origin_stride;
  return r;
}

RegistrationCase register_case_directory(const TemplateSet& templates,
                                         const std::filesystem::path& case_dir,
                                         const RegistrationOptions& options) {
  const auto face_path = case_dir / "face_scan.ply";
  const auto skull_path = case_dir / "skull_ct.ply";
  const auto lm_path = case_dir / "landmarks.json";
  std::string id = case_dir.filename().string();
  if (id.rfind("case_", 0) == 0) id = id.substr(5);
  RegistrationReport r = register_subject(templates, load_mesh(face_path), load_mesh(skull_path),
                                          load_landmark_positions(lm_path), options, id);
  const nlohmann::json config = options;
  r.registered.provenance = {{"version", kVersion},
                             {"config_hash", sha256_hex(config.dump())},
                             {"inputs",
                              {{"face_scan.ply", sha256_file(face_path)},
                               {"skull_ct.ply", sha256_file(skull_path)},
                               {"landmarks.json", sha256_file(lm_path)}}},
                             {"joint_valid_rays", r.skull.joint_valid},
                             {"face_fallback", r.face.match.fallback_count()}};
  return r.registered;
}

}  // namespace cranio
