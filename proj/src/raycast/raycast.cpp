// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/raycast/raycast.hpp"

#include "cranio/detail/binary.hpp"
#include "cranio/error.hpp"
#include "cranio/geometry/normals.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace cranio {

void RayBundle::validate() const {
  if (origins.size() != targets.size()) {
    throw ValidationError("ray bundle has " + std::to_string(origins.size()) + " origins but " +
                          std::to_string(targets.size()) + " targets");
  }
  for (std::size_t i = 0; i < origins.size(); ++i) {
    if ((targets[i] - origins[i]).norm() <= 1e-12) {
      throw ValidationError("ray " + std::to_string(i) + " has zero length");
    }
  }
}

std::size_t HitSet::valid_count() const {
  std::size_t n = 0;
  for (std::uint8_t m : mask) n += m != 0;
  return n;
}

const Vec3& HitSet::point(std::size_t i) const {
  if (!valid(i)) throw ValidationError("hit " + std::to_string(i) + " is masked out");
  return points[i];
}

const Vec3& HitSet::vector(std::size_t i) const {
  if (!valid(i)) throw ValidationError("hit " + std::to_string(i) + " is masked out");
  return vectors[i];
}

void HitSet::resize_invalid(std::size_t n) {
  points.assign(n, sentinel());
  vectors.assign(n, sentinel());
  mask.assign(n, 0);
}

void HitSet::set(std::size_t i, const Vec3& origin, const Vec3& hit) {
  points[i] = hit;
  vectors[i] = origin - hit;
  mask[i] = 1;
}

namespace {

template <typename Intersect>
HitSet cast_all(const RayBundle& rays, double t_min, Intersect intersect) {
  rays.validate();
  HitSet out;
  out.resize_invalid(rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    const Vec3 dir = rays.direction(i);
    if (auto hit = intersect(rays.origins[i], dir, t_min)) out.set(i, rays.origins[i], hit->point);
  }
  return out;
}

}  // namespace

HitSet psi_hit(const RayBundle& rays, const SpatialIndex& index) {
  if (index.mesh().empty()) throw ValidationError("psi_hit on an empty mesh");
  const double t_min = kSelfHitFraction * index.mesh().bbox_diagonal();
  return cast_all(rays, t_min, [&](const Vec3& o, const Vec3& d, double t) {
    return index.intersect(o, d, t);
  });
}

HitSet psi_hit_brute_force(const RayBundle& rays, const TriMesh& mesh) {
  if (mesh.empty()) throw ValidationError("psi_hit on an empty mesh");
  const double t_min = kSelfHitFraction * mesh.bbox_diagonal();
  return cast_all(rays, t_min, [&](const Vec3& o, const Vec3& d, double t) {
    return intersect_brute_force(mesh, o, d, t);
  });
}

std::size_t NormalMatch::fallback_count() const {
  std::size_t n = 0;
  for (std::uint8_t f : fallback) n += f != 0;
  return n;
}

NormalMatch normal_ray_match(const TriMesh& source, const SpatialIndex& target,
                             const NormalMatchOptions& options) {
  const TriMesh& tm = target.mesh();
  if (tm.empty()) throw ValidationError("normal_ray_match against an empty target");
  const std::vector<Vec3> normals = vertex_normals(source);
  const double eps = kSelfHitFraction * tm.bbox_diagonal();
  const double max_t = options.max_distance_fraction * source.bbox_diagonal();

  NormalMatch out;
  const std::size_t n = source.vertices.size();
  out.source = source.vertices;
  out.target.resize(n);
  out.fallback.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& v = source.vertices[i];
    const Vec3& nrm = normals[i];
    const ClosestPoint cp = target.closest_point(v);
    if (std::sqrt(cp.squared_distance) <= eps) {
      out.target[i] = cp.point;
      out.fallback[i] = 1;
      continue;
    }
    std::optional<RayHit> best;
    for (double sign : {1.0, -1.0}) {
      auto hit = target.intersect(v, sign * nrm, eps);
      if (!hit || hit->t > max_t) continue;
      const Vec3 fn = face_area_normal(tm, tm.faces[hit->face]).normalized();
      if (fn.dot(nrm) < options.min_normal_cosine) continue;
      if (!best || hit->t < best->t) best = hit;
    }
    if (best) {
      out.target[i] = best->point;
    } else {
      out.target[i] = cp.point;
      out.fallback[i] = 1;
    }
  }
  return out;
}

std::vector<int> strided_origins(std::size_t vertex_count, int origin_stride) {
  if (origin_stride < 1) throw ValidationError("origin stride must be positive");
  std::vector<int> out;
  out.reserve((vertex_count + origin_stride - 1) / origin_stride);
  for (std::size_t j = 0; j < vertex_count; j += origin_stride) out.push_back(static_cast<int>(j));
  return out;
}

RayBundle build_skull_rays(const TriMesh& face, const std::vector<Vec3>& endpoints,
                           int origin_stride) {
  if (endpoints.empty()) throw ValidationError("no ray endpoints");
  RayBundle rays;
  const std::vector<int> origins = strided_origins(face.vertices.size(), origin_stride);
  rays.origins.reserve(origins.size() * endpoints.size());
  rays.targets.reserve(origins.size() * endpoints.size());
  for (int j : origins) {
    for (const Vec3& q : endpoints) {
      rays.origins.push_back(face.vertices[j]);
      rays.targets.push_back(q);
    }
  }
  return rays;
}

void save_hitset(const HitSet& hits, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const nlohmann::json header = {{"format", "hitset"},
                                 {"version", 1},
                                 {"count", hits.size()},
                                 {"dtype", "float32"},
                                 {"sentinel", HitSet::kFileSentinel},
                                 {"blocks", {"points", "vectors", "mask"}}};
  out << header.dump() << '\n';
  auto put = [&](const std::vector<Vec3>& block) {
    for (std::size_t i = 0; i < hits.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        detail::put_f32(out, hits.valid(i) ? static_cast<float>(block[i][k])
                                           : static_cast<float>(HitSet::kFileSentinel));
      }
    }
  };
  put(hits.points);
  put(hits.vectors);
  out.write(reinterpret_cast<const char*>(hits.mask.data()),
            static_cast<std::streamsize>(hits.mask.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

HitSet load_hitset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string(), 1, true, "missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 1, true, e.what());
  }
  if (header.value("format", "") != "hitset") {
    throw ParseError(path.string(), 1, true, "not a hitset file");
  }
  const auto n = header.at("count").get<std::size_t>();
  HitSet hits;
  hits.resize_invalid(n);
  std::vector<Vec3> points(n), vectors(n);
  for (std::vector<Vec3>* block : {&points, &vectors}) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        float v = 0.0f;
        if (!detail::get_f32(in, v)) {
          throw ParseError(path.string(), static_cast<std::size_t>(in.gcount()), false,
                           "truncated float block");
        }
        (*block)[i][k] = v;
      }
    }
  }
  std::vector<std::uint8_t> mask(n);
  if (!in.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(n))) {
    throw ParseError(path.string(), 0, false, "truncated mask block");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) {
      hits.points[i] = points[i];
      hits.vectors[i] = vectors[i];
      hits.mask[i] = 1;
    }
  }
  return hits;
}

}  // namespace cranio
