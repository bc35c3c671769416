// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/pipeline/landmarks.hpp"

#include "cranio/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace cranio {

const Landmark& LandmarkSet::at(const std::string& name) const {
  const Landmark* l = find(name);
  if (!l) throw ValidationError("missing landmark '" + name + "'");
  return *l;
}

void LandmarkSet::validate(std::size_t vertex_count) const {
  std::set<std::string> seen;
  for (const Landmark& l : items_) {
    if (!seen.insert(l.name).second) throw ValidationError("duplicate landmark '" + l.name + "'");
    if (l.vertex >= static_cast<int>(vertex_count)) {
      throw ValidationError("landmark '" + l.name + "' vertex " + std::to_string(l.vertex) +
                            " out of range for " + std::to_string(vertex_count) + " vertices");
    }
  }
}

LandmarkSet LandmarkSet::on_mesh(const TriMesh& mesh) const {
  validate(mesh.vertex_count());
  LandmarkSet out = *this;
  for (Landmark& l : out.items_) {
    if (l.vertex < 0) throw ValidationError("landmark '" + l.name + "' has no template vertex");
    l.position = mesh.vertices[l.vertex];
  }
  return out;
}

LandmarkSet LandmarkSet::with_positions(const std::map<std::string, Vec3>& positions) const {
  LandmarkSet out;
  for (const Landmark& l : items_) {
    auto it = positions.find(l.name);
    if (it == positions.end()) continue;
    out.add({l.name, l.vertex, it->second});
  }
  return out;
}

std::map<std::string, Vec3> LandmarkSet::positions() const {
  std::map<std::string, Vec3> out;
  for (const Landmark& l : items_) out[l.name] = l.position;
  return out;
}

std::map<std::string, Vec3> load_landmark_positions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), e.byte, false, e.what());
  }
  std::map<std::string, Vec3> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (!v.is_array() || v.size() != 3) {
      throw ValidationError("landmark '" + it.key() + "' must be [x, y, z]");
    }
    out[it.key()] = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }
  return out;
}

void save_landmark_positions(const std::map<std::string, Vec3>& positions,
                             const std::filesystem::path& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : positions) j[name] = {p.x(), p.y(), p.z()};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace cranio
