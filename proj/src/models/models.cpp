// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/models/models.hpp"

#include "cranio/detail/binary.hpp"
#include "cranio/error.hpp"
#include "cranio/models/pca.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

namespace cranio {

namespace {

void check_basis(const Eigen::MatrixXd& basis, const char* what) {
  if (basis.cols() == 0) return;
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const double err = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-6) {
    throw ValidationError(std::string(what) + " basis is not orthonormal (Gram error " +
                          std::to_string(err) + ")");
  }
}

Eigen::VectorXd ratios(const Eigen::VectorXd& sv, double total) {
  if (total <= 0.0) return Eigen::VectorXd::Zero(sv.size());
  return sv.array().square() / total;
}

}  // namespace

// ---------------------------------------------------------------------------
// FSMM

Eigen::VectorXd FsmmModel::explained_variance_ratio() const {
  return ratios(singular_values, total_variance);
}

void FsmmModel::validate() const {
  const auto n = static_cast<Eigen::Index>(3 * vertices());
  if (mean.size() != n || basis.rows() != n) throw ValidationError("FSMM shape blocks disagree in size");
  if (singular_values.size() != basis.cols()) throw ValidationError("FSMM singular values/basis mismatch");
  const auto na = static_cast<Eigen::Index>(3 * face_vertices);
  if (albedo_mean.size() != na || albedo_basis.rows() != na ||
      albedo_singular_values.size() != albedo_basis.cols()) {
    throw ValidationError("FSMM albedo blocks disagree in size");
  }
  if (samples > 0 && static_cast<std::size_t>(basis.cols()) > samples) {
    throw ValidationError("FSMM has more components than samples");
  }
  for (const auto* faces : {&face_faces, &skull_faces}) {
    const std::size_t limit = faces == &face_faces ? face_vertices : skull_vertices;
    for (const Face& f : *faces) {
      for (int k = 0; k < 3; ++k) {
        if (f[k] < 0 || static_cast<std::size_t>(f[k]) >= limit) {
          throw ValidationError("FSMM topology index out of range");
        }
      }
    }
  }
  check_basis(basis, "FSMM identity");
  check_basis(albedo_basis, "FSMM albedo");
}

FsmmCoefficients FsmmCoefficients::zero(const FsmmModel& model) {
  FsmmCoefficients c;
  c.id = Eigen::VectorXd::Zero(model.n_id());
  c.albedo = Eigen::VectorXd::Zero(model.n_alb());
  return c;
}

void FsmmCoefficients::validate(const FsmmModel& model) const {
  if (id.size() != model.n_id()) {
    throw ValidationError("expected " + std::to_string(model.n_id()) + " identity coefficients, got " +
                          std::to_string(id.size()));
  }
  if (albedo.size() != model.n_alb()) {
    throw ValidationError("expected " + std::to_string(model.n_alb()) +
                          " albedo coefficients, got " + std::to_string(albedo.size()));
  }
  if (!id.allFinite() || !albedo.allFinite() || !angles.allFinite() || !translation.allFinite()) {
    throw ValidationError("FSMM coefficients must be finite");
  }
  for (int k = 0; k < 3; ++k) {
    if (!(angles[k] > -std::numbers::pi && angles[k] <= std::numbers::pi)) {
      throw ValidationError("rotation angles must lie in (-pi, pi]");
    }
  }
}

Eigen::VectorXd stack_shape(const TriMesh& face, const TriMesh& skull) {
  Eigen::VectorXd v(3 * (face.vertices.size() + skull.vertices.size()));
  Eigen::Index o = 0;
  for (const TriMesh* m : {&face, &skull}) {
    for (const Vec3& p : m->vertices) {
      v.segment<3>(o) = p;
      o += 3;
    }
  }
  return v;
}

FsmmModel build_fsmm(std::span<const RegistrationCase> cases, int n_id, int n_alb) {
  if (cases.size() < 2) throw ValidationError("FSMM needs at least two registered cases");
  const RegistrationCase& first = cases.front();
  std::size_t with_albedo = 0;
  for (const RegistrationCase& c : cases) {
    if (!c.face.same_topology(first.face) || !c.skull.same_topology(first.skull)) {
      throw ValidationError("case " + c.id + " does not share the template topology");
    }
    if (c.face.albedo) ++with_albedo;
  }
  if (with_albedo != 0 && with_albedo != cases.size()) {
    throw ValidationError("either every case or no case must carry face albedo");
  }

  FsmmModel m;
  m.face_vertices = first.face.vertices.size();
  m.skull_vertices = first.skull.vertices.size();
  m.face_faces = first.face.faces;
  m.skull_faces = first.skull.faces;
  m.samples = cases.size();

  const auto n = static_cast<Eigen::Index>(cases.size());
  Eigen::MatrixXd shapes(n, static_cast<Eigen::Index>(3 * m.vertices()));
  for (Eigen::Index i = 0; i < n; ++i) {
    shapes.row(i) = stack_shape(cases[i].face, cases[i].skull).transpose();
  }
  Pca shape = fit_pca(shapes, n_id);
  m.mean = std::move(shape.mean);
  m.basis = std::move(shape.basis);
  m.singular_values = std::move(shape.singular_values);
  m.total_variance = shape.total_variance;
  m.rank = shape.rank;

  const auto na = static_cast<Eigen::Index>(3 * m.face_vertices);
  if (with_albedo == 0) {
    m.albedo_mean = Eigen::VectorXd::Zero(na);
    m.albedo_basis.resize(na, 0);
    m.albedo_singular_values.resize(0);
  } else {
    Eigen::MatrixXd albedo(n, na);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& a = *cases[i].face.albedo;
      for (std::size_t v = 0; v < a.size(); ++v) albedo.block<1, 3>(i, 3 * v) = a[v].transpose();
    }
    Pca alb = fit_pca(albedo, n_alb);
    m.albedo_mean = std::move(alb.mean);
    m.albedo_basis = std::move(alb.basis);
    m.albedo_singular_values = std::move(alb.singular_values);
    m.albedo_total_variance = alb.total_variance;
    m.albedo_rank = alb.rank;
  }
  return m;
}

Eigen::VectorXd fsmm_shape(const FsmmModel& model, const Eigen::VectorXd& id) {
  if (id.size() != model.n_id()) throw ValidationError("identity coefficient count mismatch");
  return model.mean + model.basis * id;
}

Eigen::VectorXd fsmm_project(const FsmmModel& model, const Eigen::VectorXd& shape) {
  if (shape.size() != model.mean.size()) throw ValidationError("shape vector length mismatch");
  return model.basis.transpose() * (shape - model.mean);
}

Eigen::VectorXd component_stddev(const Eigen::VectorXd& singular_values, std::size_t samples) {
  if (samples < 2) throw ValidationError("standard deviations need at least 2 samples");
  return singular_values / std::sqrt(static_cast<double>(samples - 1));
}

namespace {

Eigen::VectorXd gaussian(const Eigen::VectorXd& stddev, std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd out(stddev.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = sigma * stddev[k] * n01(rng);
  return out;
}

}  // namespace

FsmmCoefficients random_fsmm_coefficients(const FsmmModel& model, std::uint64_t seed, double sigma) {
  if (!(sigma >= 0.0)) throw ValidationError("sampling sigma must be non-negative");
  std::mt19937_64 rng(seed);
  FsmmCoefficients c = FsmmCoefficients::zero(model);
  c.id = gaussian(component_stddev(model.singular_values.head(model.n_id()), model.samples), rng, sigma);
  if (model.n_alb() > 0) {
    c.albedo = gaussian(component_stddev(model.albedo_singular_values.head(model.n_alb()), model.samples),
                        rng, sigma);
  }
  return c;
}

FsmmSample sample_fsmm(const FsmmModel& model, const FsmmCoefficients& coeffs) {
  coeffs.validate(model);
  const Eigen::VectorXd shape = fsmm_shape(model, coeffs.id);
  const Mat3 r = rotation_xyz(coeffs.angles);
  FsmmSample out;
  out.face.faces = model.face_faces;
  out.skull.faces = model.skull_faces;
  out.face.vertices.resize(model.face_vertices);
  out.skull.vertices.resize(model.skull_vertices);
  for (std::size_t i = 0; i < model.vertices(); ++i) {
    const Vec3 p = r * shape.segment<3>(static_cast<Eigen::Index>(3 * i)) + coeffs.translation;
    if (i < model.face_vertices) {
      out.face.vertices[i] = p;
    } else {
      out.skull.vertices[i - model.face_vertices] = p;
    }
  }
  const Eigen::VectorXd albedo = model.albedo_mean + model.albedo_basis * coeffs.albedo;
  std::vector<Vec3> colours(model.face_vertices);
  for (std::size_t i = 0; i < colours.size(); ++i) {
    colours[i] = albedo.segment<3>(static_cast<Eigen::Index>(3 * i)).cwiseMax(0.0).cwiseMin(1.0);
  }
  out.face.albedo = std::move(colours);
  return out;
}

// ---------------------------------------------------------------------------
// TMM

std::size_t TissueField::valid_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::size_t TmmModel::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

void TmmModel::validate() const {
  const auto n = static_cast<Eigen::Index>(3 * rays());
  if (mean.size() != n || basis.rows() != n || singular_values.size() != basis.cols()) {
    throw ValidationError("TMM blocks disagree in size");
  }
  if (index_map.size() != rays() || index_map.fallback.size() != rays()) {
    throw ValidationError("TMM index map length does not match the ray count");
  }
  if (n_q < 1 || rays() != face_vertices * static_cast<std::size_t>(n_q)) {
    throw ValidationError("TMM ray count is not face vertices x n_q");
  }
  for (std::size_t r = 0; r < rays(); ++r) {
    if (valid[r]) continue;
    const auto o = static_cast<Eigen::Index>(3 * r);
    if (mean.segment<3>(o).any() || (basis.cols() > 0 && basis.middleRows<3>(o).any())) {
      throw ValidationError("TMM carries data at an invalid ray");
    }
  }
  check_basis(basis, "TMM");
}

TmmCoefficients TmmCoefficients::zero(const TmmModel& model) {
  TmmCoefficients c;
  c.ti = Eigen::VectorXd::Zero(model.n_ti());
  return c;
}

void TmmCoefficients::validate(const TmmModel& model) const {
  if (ti.size() != model.n_ti()) {
    throw ValidationError("expected " + std::to_string(model.n_ti()) + " tissue coefficients, got " +
                          std::to_string(ti.size()));
  }
  if (!ti.allFinite()) throw ValidationError("tissue coefficients must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("tissue scale must be a positive finite number");
  }
}

TmmModel build_tmm(std::span<const RegistrationCase> cases, const IndexMap& index_map, int n_ti) {
  if (cases.size() < 2) throw ValidationError("TMM needs at least two registered cases");
  const RegistrationCase& first = cases.front();
  const std::size_t rays = first.tissue.size();
  for (const RegistrationCase& c : cases) {
    if (c.n_q != first.n_q || c.origin_stride != 1) {
      throw ValidationError("case " + c.id + ": TMM cases need equal n_q and every face vertex as origin");
    }
    if (c.tissue.size() != rays || rays != c.face.vertices.size() * static_cast<std::size_t>(c.n_q)) {
      throw ValidationError("case " + c.id + ": tissue field length mismatch");
    }
  }
  if (index_map.size() != rays) throw ValidationError("index map length does not match the rays");

  TmmModel m;
  m.n_q = first.n_q;
  m.face_vertices = first.face.vertices.size();
  m.samples = cases.size();
  m.index_map = index_map;
  m.valid.assign(rays, 1);
  for (const RegistrationCase& c : cases) {
    for (std::size_t r = 0; r < rays; ++r) m.valid[r] &= c.tissue.mask[r];
  }
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < rays; ++r) {
    if (m.valid[r]) kept.push_back(r);
  }
  const auto n = static_cast<Eigen::Index>(cases.size());
  const auto k = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd data(n, 3 * k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      data.block<1, 3>(i, 3 * j) = cases[i].tissue.vectors[kept[j]].transpose();
    }
  }
  const Pca pca = fit_pca(data, n_ti);
  m.total_variance = pca.total_variance;
  m.rank = pca.rank;
  m.singular_values = pca.singular_values;
  m.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * rays));
  m.basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * rays), pca.basis.cols());
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto o = static_cast<Eigen::Index>(3 * kept[j]);
    if (pca.mean.size() > 0) m.mean.segment<3>(o) = pca.mean.segment<3>(3 * j);
    if (pca.basis.cols() > 0) m.basis.middleRows<3>(o) = pca.basis.middleRows<3>(3 * j);
  }
  return m;
}

TmmCoefficients random_tmm_coefficients(const TmmModel& model, std::uint64_t seed, double sigma) {
  if (!(sigma >= 0.0)) throw ValidationError("sampling sigma must be non-negative");
  std::mt19937_64 rng(seed);
  TmmCoefficients c = TmmCoefficients::zero(model);
  c.ti = gaussian(component_stddev(model.singular_values.head(model.n_ti()), model.samples), rng, sigma);
  return c;
}

TissueField sample_tmm(const TmmModel& model, const TmmCoefficients& coeffs) {
  coeffs.validate(model);
  const Eigen::VectorXd d = (model.mean + model.basis * coeffs.ti) * coeffs.scale;
  TissueField out;
  out.mask = model.valid;
  out.vectors.resize(model.rays());
  for (std::size_t r = 0; r < model.rays(); ++r) {
    out.vectors[r] = d.segment<3>(static_cast<Eigen::Index>(3 * r));
  }
  return out;
}

TissueField tissue_field(const HitSet& hits) {
  TissueField out;
  out.mask = hits.mask;
  out.vectors.assign(hits.size(), Vec3::Zero());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits.valid(i)) out.vectors[i] = hits.vector(i);
  }
  return out;
}

IndexMap template_index_map(const TemplateSet& templates, const SkullRayOptions& rays) {
  const std::vector<Vec3> q = psi_map(templates.face, templates.face_landmarks, rays.n_q);
  const RayBundle bundle = build_skull_rays(templates.face, q, rays.origin_stride);
  const HitSet hits = psi_hit(bundle, SpatialIndex(templates.skull));
  return build_index_map(templates.skull, hits, bundle.origins);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kMagic[4] = {'B', 'F', 'S', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

struct OutBlock {
  std::string name;
  std::string dtype;  // f32, f64, i32, u8
  std::vector<std::size_t> shape;
  std::vector<double> real;
  std::vector<std::int64_t> integer;
};

OutBlock real_block(std::string name, const Eigen::MatrixXd& m, StorageType storage) {
  OutBlock b{std::move(name), storage == StorageType::Float32 ? "f32" : "f64",
             {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, {}, {}};
  b.real.assign(m.data(), m.data() + m.size());
  return b;
}

OutBlock real_block(std::string name, const Eigen::VectorXd& v, StorageType storage) {
  OutBlock b{std::move(name), storage == StorageType::Float32 ? "f32" : "f64",
             {static_cast<std::size_t>(v.size())}, {}, {}};
  b.real.assign(v.data(), v.data() + v.size());
  return b;
}

OutBlock face_block(std::string name, const std::vector<Face>& faces) {
  OutBlock b{std::move(name), "i32", {faces.size(), 3}, {}, {}};
  for (const Face& f : faces) b.integer.insert(b.integer.end(), f.begin(), f.end());
  return b;
}

template <typename T>
OutBlock int_block(std::string name, const char* dtype, const std::vector<T>& values) {
  OutBlock b{std::move(name), dtype, {values.size()}, {}, {}};
  b.integer.assign(values.begin(), values.end());
  return b;
}

void write_model(const std::filesystem::path& path, nlohmann::json manifest,
                 const std::vector<OutBlock>& blocks) {
  nlohmann::json list = nlohmann::json::array();
  for (const OutBlock& b : blocks) list.push_back({{"name", b.name}, {"dtype", b.dtype}, {"shape", b.shape}});
  manifest["blocks"] = list;
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  detail::put_u32(out, kFormatVersion);
  detail::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const OutBlock& b : blocks) {
    if (b.dtype == "f32") {
      for (double v : b.real) detail::put_f32(out, static_cast<float>(v));
    } else if (b.dtype == "f64") {
      for (double v : b.real) detail::put_f64(out, v);
    } else if (b.dtype == "i32") {
      for (std::int64_t v : b.integer) detail::put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)));
    } else {
      for (std::int64_t v : b.integer) detail::put_le(out, static_cast<std::uint64_t>(v), 1);
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

struct InBlock {
  std::vector<std::size_t> shape;
  std::vector<double> real;
  std::vector<std::int64_t> integer;
};

struct ModelFile {
  nlohmann::json manifest;
  std::map<std::string, InBlock> blocks;

  const InBlock& at(const std::string& name) const {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw ValidationError("model file lacks block '" + name + "'");
    return it->second;
  }
  Eigen::VectorXd vector(const std::string& name) const {
    const InBlock& b = at(name);
    return Eigen::Map<const Eigen::VectorXd>(b.real.data(), static_cast<Eigen::Index>(b.real.size()));
  }
  Eigen::MatrixXd matrix(const std::string& name) const {
    const InBlock& b = at(name);
    if (b.shape.size() != 2) throw ValidationError("block '" + name + "' is not a matrix");
    return Eigen::Map<const Eigen::MatrixXd>(b.real.data(), static_cast<Eigen::Index>(b.shape[0]),
                                             static_cast<Eigen::Index>(b.shape[1]));
  }
  std::vector<Face> faces(const std::string& name) const {
    const InBlock& b = at(name);
    std::vector<Face> out(b.integer.size() / 3);
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (int k = 0; k < 3; ++k) out[i][k] = static_cast<int>(b.integer[3 * i + k]);
    }
    return out;
  }
};

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw ParseError(path.string(), 0, false, "bad magic, not a model file");
  }
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  if (!detail::get_u32(in, version) || !detail::get_u64(in, length)) {
    throw ParseError(path.string(), 4, false, "truncated header");
  }
  if (version != kFormatVersion) {
    throw ParseError(path.string(), 4, false,
                     "unsupported model version " + std::to_string(version));
  }
  if (length > (1u << 26)) throw ParseError(path.string(), 8, false, "implausible manifest length");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) {
    throw ParseError(path.string(), 16, false, "truncated manifest");
  }
  ModelFile file;
  try {
    file.manifest = nlohmann::json::parse(text);
    for (const auto& entry : file.manifest.at("blocks")) {
      const auto name = entry.at("name").get<std::string>();
      const auto dtype = entry.at("dtype").get<std::string>();
      InBlock b;
      b.shape = entry.at("shape").get<std::vector<std::size_t>>();
      std::size_t count = 1;
      for (std::size_t s : b.shape) count *= s;
      bool ok = true;
      if (dtype == "f32" || dtype == "f64") {
        b.real.resize(count);
        for (std::size_t i = 0; i < count && ok; ++i) {
          if (dtype == "f32") {
            float v = 0.0f;
            ok = detail::get_f32(in, v);
            b.real[i] = v;
          } else {
            ok = detail::get_f64(in, b.real[i]);
          }
        }
      } else if (dtype == "i32" || dtype == "u8") {
        b.integer.resize(count);
        const int width = dtype == "i32" ? 4 : 1;
        for (std::size_t i = 0; i < count && ok; ++i) {
          std::uint64_t bits = 0;
          ok = detail::get_le(in, bits, width);
          b.integer[i] = width == 4 ? static_cast<std::int32_t>(static_cast<std::uint32_t>(bits))
                                    : static_cast<std::int64_t>(bits);
        }
      } else {
        throw ParseError(path.string(), 0, false, "unknown dtype '" + dtype + "' in block " + name);
      }
      if (!ok) {
        throw ParseError(path.string(), 0, false, "truncated file: missing block '" + name + "'");
      }
      file.blocks.emplace(name, std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 16, false, std::string("malformed manifest: ") + e.what());
  }
  return file;
}

template <typename T>
T meta(const ModelFile& f, const char* key) {
  try {
    return f.manifest.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("model manifest lacks '") + key + "'");
  }
}

void expect_kind(const ModelFile& f, const std::filesystem::path& path, const char* kind) {
  if (f.manifest.value("kind", "") != kind) {
    throw ValidationError(path.string() + " does not hold a " + kind + " model");
  }
}

}  // namespace

void save_model(const FsmmModel& m, const std::filesystem::path& path, StorageType storage) {
  m.validate();
  const nlohmann::json manifest = {{"kind", "fsmm"},
                                   {"face_vertices", m.face_vertices},
                                   {"skull_vertices", m.skull_vertices},
                                   {"samples", m.samples},
                                   {"n_id", m.n_id()},
                                   {"n_alb", m.n_alb()},
                                   {"rank", m.rank},
                                   {"albedo_rank", m.albedo_rank},
                                   {"total_variance", m.total_variance},
                                   {"albedo_total_variance", m.albedo_total_variance}};
  write_model(path, manifest,
              {real_block("mean", m.mean, storage), real_block("basis", m.basis, storage),
               real_block("singular_values", m.singular_values, storage),
               real_block("albedo_mean", m.albedo_mean, storage),
               real_block("albedo_basis", m.albedo_basis, storage),
               real_block("albedo_singular_values", m.albedo_singular_values, storage),
               face_block("face_faces", m.face_faces), face_block("skull_faces", m.skull_faces)});
}

void save_model(const TmmModel& m, const std::filesystem::path& path, StorageType storage) {
  m.validate();
  const nlohmann::json manifest = {{"kind", "tmm"},
                                   {"face_vertices", m.face_vertices},
                                   {"n_q", m.n_q},
                                   {"samples", m.samples},
                                   {"n_ti", m.n_ti()},
                                   {"rank", m.rank},
                                   {"total_variance", m.total_variance}};
  write_model(path, manifest,
              {real_block("mean", m.mean, storage), real_block("basis", m.basis, storage),
               real_block("singular_values", m.singular_values, storage),
               int_block("valid", "u8", m.valid), int_block("index_map", "i32", m.index_map.index),
               int_block("index_fallback", "u8", m.index_map.fallback)});
}

FsmmModel load_fsmm(const std::filesystem::path& path) {
  const ModelFile f = read_model(path);
  expect_kind(f, path, "fsmm");
  FsmmModel m;
  m.face_vertices = meta<std::size_t>(f, "face_vertices");
  m.skull_vertices = meta<std::size_t>(f, "skull_vertices");
  m.samples = meta<std::size_t>(f, "samples");
  m.rank = meta<int>(f, "rank");
  m.albedo_rank = meta<int>(f, "albedo_rank");
  m.total_variance = meta<double>(f, "total_variance");
  m.albedo_total_variance = meta<double>(f, "albedo_total_variance");
  m.mean = f.vector("mean");
  m.basis = f.matrix("basis");
  m.singular_values = f.vector("singular_values");
  m.albedo_mean = f.vector("albedo_mean");
  m.albedo_basis = f.matrix("albedo_basis");
  m.albedo_singular_values = f.vector("albedo_singular_values");
  m.face_faces = f.faces("face_faces");
  m.skull_faces = f.faces("skull_faces");
  m.validate();
  return m;
}

TmmModel load_tmm(const std::filesystem::path& path) {
  const ModelFile f = read_model(path);
  expect_kind(f, path, "tmm");
  TmmModel m;
  m.face_vertices = meta<std::size_t>(f, "face_vertices");
  m.n_q = meta<int>(f, "n_q");
  m.samples = meta<std::size_t>(f, "samples");
  m.rank = meta<int>(f, "rank");
  m.total_variance = meta<double>(f, "total_variance");
  m.mean = f.vector("mean");
  m.basis = f.matrix("basis");
  m.singular_values = f.vector("singular_values");
  for (std::int64_t v : f.at("valid").integer) m.valid.push_back(static_cast<std::uint8_t>(v));
  for (std::int64_t v : f.at("index_map").integer) m.index_map.index.push_back(static_cast<int>(v));
  for (std::int64_t v : f.at("index_fallback").integer) {
    m.index_map.fallback.push_back(static_cast<std::uint8_t>(v));
  }
  m.validate();
  return m;
}

std::string model_kind(const std::filesystem::path& path) {
  return read_model(path).manifest.value("kind", "");
}

}  // namespace cranio
