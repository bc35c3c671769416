// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "support/fixtures.hpp"

#include <array>
#include <map>
#include <mutex>
#include <unistd.h>

namespace cranio::testing {

namespace fs = std::filesystem;

const synth::HeadTemplates& head_templates() {
  static const synth::HeadTemplates t = synth::make_templates();
  return t;
}

const TemplateSet& template_set() {
  static const TemplateSet t = synth::template_set(head_templates());
  return t;
}

TriMesh grid_plane(int cols, int rows, double w, double h) {
  TriMesh m;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m.vertices.emplace_back(w * c / (cols - 1), h * r / (rows - 1), 0.0);
    }
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int a = r * cols + c;
      m.faces.push_back({a, a + 1, a + cols + 1});
      m.faces.push_back({a, a + cols + 1, a + cols});
    }
  }
  return m;
}

TriMesh icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      m.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
      return mid[key] = static_cast<int>(m.vertices.size()) - 1;
    };
    std::vector<Face> faces;
    for (const Face& f : m.faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (Vec3& v : m.vertices) v = radius * v.normalized();
  return m;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

const std::vector<synth::SynthCase>& corpus(int n, std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::pair<int, std::uint64_t>, std::vector<synth::SynthCase>> cache;
  const std::lock_guard lock(mutex);
  auto key = std::make_pair(n, seed);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, synth::generate_corpus(head_templates(), n, seed)).first;
  return it->second;
}

RegistrationCase truth_case(const synth::SynthCase& c) {
  const TemplateSet& t = template_set();
  RegistrationCase rc;
  rc.id = c.id;
  rc.face = c.face;
  rc.skull = c.skull;
  rc.n_q = 3;
  rc.origin_stride = 1;
  const std::vector<Vec3> q = psi_map(c.face, t.face_landmarks, 3);
  rc.tissue = psi_hit(build_skull_rays(c.face, q, 1), SpatialIndex(c.skull));
  return rc;
}

std::vector<RegistrationCase> truth_cases(int n, std::uint64_t seed) {
  std::vector<RegistrationCase> out;
  for (const auto& c : corpus(n, seed)) out.push_back(truth_case(c));
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cranio_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace cranio::testing
