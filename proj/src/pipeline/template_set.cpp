// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/pipeline/template_set.hpp"

#include "cranio/error.hpp"
#include "cranio/geometry/mesh_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace cranio {

namespace {

void check_symmetry(const std::vector<int>& sym, std::size_t n, const char* what) {
  if (sym.size() != n) {
    throw ValidationError(std::string(what) + " symmetry map has " + std::to_string(sym.size()) +
                          " entries, expected " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (sym[i] < 0 || sym[i] >= static_cast<int>(n) || sym[sym[i]] != static_cast<int>(i)) {
      throw ValidationError(std::string(what) + " symmetry map is not an involution at " +
                            std::to_string(i));
    }
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, false, e.what());
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

nlohmann::json landmark_indices(const LandmarkSet& set) {
  nlohmann::json j = nlohmann::json::array();
  for (const Landmark& l : set.items()) j.push_back({l.name, l.vertex});
  return j;
}

LandmarkSet landmarks_from(const nlohmann::json& j, const TriMesh& mesh) {
  LandmarkSet set;
  for (const auto& e : j) {
    const int v = e.at(1).get<int>();
    if (v < 0 || v >= static_cast<int>(mesh.vertices.size())) {
      throw ValidationError("landmark vertex index out of range");
    }
    set.add({e.at(0).get<std::string>(), v, mesh.vertices[v]});
  }
  return set;
}

}  // namespace

void TemplateSet::validate() const {
  face.validate();
  skull.validate();
  face_landmarks.validate(face.vertices.size());
  skull_landmarks.validate(skull.vertices.size());
  check_symmetry(face_symmetry, face.vertices.size(), "face");
  check_symmetry(skull_symmetry, skull.vertices.size(), "skull");
  if (skull_regions.vertex_region.size() != skull.vertices.size()) {
    throw ValidationError("skull region labels do not cover the skull template");
  }
}

void save_template_set(const TemplateSet& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_mesh(t.face, dir / "face.ply");
  save_mesh(t.skull, dir / "skull.ply");
  write_json(landmark_indices(t.face_landmarks), dir / "face_landmarks.json");
  write_json(landmark_indices(t.skull_landmarks), dir / "skull_landmarks.json");
  write_json({{"names", t.skull_regions.names}, {"vertex_region", t.skull_regions.vertex_region}},
             dir / "skull_regions.json");
  write_json({{"face", t.face_symmetry}, {"skull", t.skull_symmetry}}, dir / "symmetry.json");
}

TemplateSet load_template_set(const std::filesystem::path& dir) {
  TemplateSet t;
  t.face = load_mesh(dir / "face.ply");
  t.skull = load_mesh(dir / "skull.ply");
  try {
    t.face_landmarks = landmarks_from(read_json(dir / "face_landmarks.json"), t.face);
    t.skull_landmarks = landmarks_from(read_json(dir / "skull_landmarks.json"), t.skull);
    const nlohmann::json regions = read_json(dir / "skull_regions.json");
    t.skull_regions.names = regions.at("names").get<std::vector<std::string>>();
    t.skull_regions.vertex_region = regions.at("vertex_region").get<std::vector<int>>();
    const nlohmann::json sym = read_json(dir / "symmetry.json");
    t.face_symmetry = sym.at("face").get<std::vector<int>>();
    t.skull_symmetry = sym.at("skull").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed template fixture in " + dir.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

}  // namespace cranio
