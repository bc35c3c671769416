// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/geometry/mesh_io.hpp"

#include "cranio/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace cranio {

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8:
      return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16:
      return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32:
      return 4;
    case ScalarType::Float64:
      return 8;
  }
  return 0;
}

bool parse_scalar_type(const std::string& s, ScalarType& out) {
  static const std::pair<const char*, ScalarType> table[] = {
      {"char", ScalarType::Int8},     {"int8", ScalarType::Int8},
      {"uchar", ScalarType::UInt8},   {"uint8", ScalarType::UInt8},
      {"short", ScalarType::Int16},   {"int16", ScalarType::Int16},
      {"ushort", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},
      {"int", ScalarType::Int32},     {"int32", ScalarType::Int32},
      {"uint", ScalarType::UInt32},   {"uint32", ScalarType::UInt32},
      {"float", ScalarType::Float32}, {"float32", ScalarType::Float32},
      {"double", ScalarType::Float64}, {"float64", ScalarType::Float64},
  };
  for (const auto& [name, type] : table) {
    if (s == name) {
      out = type;
      return true;
    }
  }
  return false;
}

struct PlyProperty {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

// Little-endian decode, independent of host byte order.
double decode_le(const unsigned char* p, ScalarType t) {
  auto u = [&](int n) {
    std::uint64_t v = 0;
    for (int i = n - 1; i >= 0; --i) v = (v << 8) | p[i];
    return v;
  };
  switch (t) {
    case ScalarType::Int8:
      return static_cast<std::int8_t>(p[0]);
    case ScalarType::UInt8:
      return p[0];
    case ScalarType::Int16:
      return static_cast<std::int16_t>(u(2));
    case ScalarType::UInt16:
      return static_cast<std::uint16_t>(u(2));
    case ScalarType::Int32:
      return static_cast<std::int32_t>(u(4));
    case ScalarType::UInt32:
      return static_cast<std::uint32_t>(u(4));
    case ScalarType::Float32:
      return std::bit_cast<float>(static_cast<std::uint32_t>(u(4)));
    case ScalarType::Float64:
      return std::bit_cast<double>(u(8));
  }
  return 0.0;
}

void put_le(std::ostream& out, std::uint64_t bits, int n) {
  char buf[8];
  for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, n);
}

void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v), 8); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v), 4); }

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double parse_double(const std::string& tok, const std::string& name, std::size_t line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(name, line, true, "cannot parse number '" + tok + "'");
  }
  return v;
}

long parse_long(const std::string& tok, const std::string& name, std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(name, line, true, "cannot parse integer '" + tok + "'");
  }
  return v;
}

// Collects the per-vertex and per-face payload of a PLY body.
struct PlyBuilder {
  TriMesh mesh;
  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  ScalarType color_type = ScalarType::UInt8;

  void bind(const PlyElement& vertex) {
    for (std::size_t i = 0; i < vertex.properties.size(); ++i) {
      const auto& p = vertex.properties[i];
      const int k = static_cast<int>(i);
      if (p.name == "x") ix = k;
      if (p.name == "y") iy = k;
      if (p.name == "z") iz = k;
      if (p.name == "red" || p.name == "r") {
        ir = k;
        color_type = p.type;
      }
      if (p.name == "green" || p.name == "g") ig = k;
      if (p.name == "blue" || p.name == "b") ib = k;
    }
  }
  bool has_color() const { return ir >= 0 && ig >= 0 && ib >= 0; }

  void add_vertex(const std::vector<double>& values) {
    mesh.vertices.emplace_back(values[ix], values[iy], values[iz]);
    if (has_color()) {
      Vec3 c(values[ir], values[ig], values[ib]);
      if (color_type != ScalarType::Float32 && color_type != ScalarType::Float64) c /= 255.0;
      mesh.albedo->push_back(c);
    }
  }
};

bool is_face_list(const PlyProperty& p) {
  return p.is_list && (p.name == "vertex_indices" || p.name == "vertex_index");
}

}  // namespace

MeshFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".obj") return MeshFormat::Obj;
  if (ext == ".ply") return MeshFormat::Ply;
  throw ValidationError("unsupported mesh extension '" + ext + "' for " + path.string());
}

TriMesh read_ply(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError(name, 1, true, "missing 'ply' magic");
  std::string encoding;
  std::vector<PlyElement> elements;
  while (true) {
    if (!next_line()) throw ParseError(name, line_no, true, "unterminated header");
    auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() < 2) throw ParseError(name, line_no, true, "bad format line");
      encoding = tok[1];
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(name, line_no, true, "bad element line");
      PlyElement el;
      el.name = tok[1];
      el.count = static_cast<std::size_t>(parse_long(tok[2], name, line_no));
      elements.push_back(el);
    } else if (tok[0] == "property") {
      if (elements.empty()) throw ParseError(name, line_no, true, "property before element");
      PlyProperty p;
      if (tok.size() == 5 && tok[1] == "list") {
        p.is_list = true;
        if (!parse_scalar_type(tok[2], p.count_type) || !parse_scalar_type(tok[3], p.type)) {
          throw ParseError(name, line_no, true, "unknown list property type");
        }
        p.name = tok[4];
      } else if (tok.size() == 3) {
        if (!parse_scalar_type(tok[1], p.type)) {
          throw ParseError(name, line_no, true, "unknown property type '" + tok[1] + "'");
        }
        p.name = tok[2];
      } else {
        throw ParseError(name, line_no, true, "bad property line");
      }
      elements.back().properties.push_back(p);
    } else {
      throw ParseError(name, line_no, true, "unexpected header keyword '" + tok[0] + "'");
    }
  }
  const bool ascii = encoding == "ascii";
  if (!ascii && encoding != "binary_little_endian") {
    throw ParseError(name, line_no, true, "unsupported PLY encoding '" + encoding + "'");
  }

  PlyBuilder builder;
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      builder.bind(el);
      if (builder.ix < 0 || builder.iy < 0 || builder.iz < 0) {
        throw ParseError(name, line_no, true, "vertex element lacks x/y/z");
      }
    }
  }
  if (builder.has_color()) builder.mesh.albedo.emplace();

  std::size_t offset = static_cast<std::size_t>(in.tellg());
  std::vector<double> values;
  std::vector<unsigned char> buf(8);
  auto read_binary = [&](ScalarType t) -> double {
    const std::size_t n = scalar_size(t);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
      throw ParseError(name, offset, false, "unexpected end of binary payload");
    }
    offset += n;
    return decode_le(buf.data(), t);
  };

  for (const auto& el : elements) {
    for (std::size_t item = 0; item < el.count; ++item) {
      std::vector<std::string> tok;
      std::size_t cursor = 0;
      if (ascii) {
        if (!next_line()) throw ParseError(name, line_no, true, "unexpected end of file");
        tok = split_ws(line);
      }
      auto take = [&](ScalarType t) -> double {
        if (!ascii) return read_binary(t);
        if (cursor >= tok.size()) throw ParseError(name, line_no, true, "too few values");
        return parse_double(tok[cursor++], name, line_no);
      };
      values.clear();
      std::vector<int> face_indices;
      for (const auto& p : el.properties) {
        if (p.is_list) {
          const auto count = static_cast<long>(take(p.count_type));
          std::vector<int> list;
          for (long i = 0; i < count; ++i) list.push_back(static_cast<int>(take(p.type)));
          if (el.name == "face" && is_face_list(p)) face_indices = std::move(list);
          values.push_back(0.0);
        } else {
          values.push_back(take(p.type));
        }
      }
      if (el.name == "vertex") {
        builder.add_vertex(values);
      } else if (el.name == "face") {
        if (face_indices.size() != 3) {
          throw ParseError(name, ascii ? line_no : offset, ascii,
                           "face " + std::to_string(item) + " has " +
                               std::to_string(face_indices.size()) + " vertices; only triangles");
        }
        builder.mesh.faces.push_back({face_indices[0], face_indices[1], face_indices[2]});
      }
    }
  }
  builder.mesh.validate();
  return std::move(builder.mesh);
}

TriMesh read_obj(std::istream& in, const std::string& name) {
  TriMesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) throw ParseError(name, line_no, true, "vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(tok[1], name, line_no),
                                 parse_double(tok[2], name, line_no),
                                 parse_double(tok[3], name, line_no));
    } else if (tok[0] == "f") {
      if (tok.size() != 4) {
        throw ParseError(name, line_no, true, "face with " + std::to_string(tok.size() - 1) +
                                                  " vertices; only triangles are supported");
      }
      Face f{};
      for (int k = 0; k < 3; ++k) {
        const std::string& t = tok[k + 1];
        const std::string head = t.substr(0, t.find('/'));
        long idx = parse_long(head, name, line_no);
        if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
        if (idx <= 0) throw ParseError(name, line_no, true, "invalid vertex index " + head);
        f[k] = static_cast<int>(idx - 1);
      }
      mesh.faces.push_back(f);
    }
  }
  mesh.validate();
  return mesh;
}

void write_ply(const TriMesh& mesh, std::ostream& out, const PlyOptions& options) {
  const bool color = mesh.albedo.has_value();
  const char* real = options.double_precision ? "double" : "float";
  out << "ply\n"
      << "format " << (options.binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property " << real << " x\nproperty " << real << " y\nproperty " << real << " z\n";
  if (color) {
    out << "property " << real << " red\nproperty " << real << " green\nproperty " << real
        << " blue\n";
  }
  out << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\n"
      << "end_header\n";

  auto emit = [&](double v) {
    if (!options.binary) {
      out << v;
    } else if (options.double_precision) {
      put_f64(out, v);
    } else {
      put_f32(out, static_cast<float>(v));
    }
  };
  if (!options.binary) out << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& v = mesh.vertices[i];
    for (int k = 0; k < 3; ++k) {
      emit(v[k]);
      if (!options.binary && (k < 2 || color)) out << ' ';
    }
    if (color) {
      const Vec3& c = (*mesh.albedo)[i];
      for (int k = 0; k < 3; ++k) {
        emit(c[k]);
        if (!options.binary && k < 2) out << ' ';
      }
    }
    if (!options.binary) out << '\n';
  }
  for (const Face& f : mesh.faces) {
    if (options.binary) {
      out.put(3);
      for (int idx : f) put_le(out, static_cast<std::uint32_t>(idx), 4);
    } else {
      out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
  }
}

SaveReport write_obj(const TriMesh& mesh, std::ostream& out) {
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Face& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  return SaveReport{mesh.albedo.has_value()};
}

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  return format == MeshFormat::Ply ? read_ply(in, path.string()) : read_obj(in, path.string());
}

TriMesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, format_from_path(path));
}

SaveReport save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format,
                     const PlyOptions& options) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  SaveReport report;
  if (format == MeshFormat::Ply) {
    write_ply(mesh, out, options);
  } else {
    report = write_obj(mesh, out);
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
  return report;
}

SaveReport save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
                     const PlyOptions& options) {
  return save_mesh(mesh, path, format_from_path(path), options);
}

std::string to_ply_bytes(const TriMesh& mesh, const PlyOptions& options) {
  std::ostringstream out(std::ios::binary);
  write_ply(mesh, out, options);
  return out.str();
}

TriMesh from_ply_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_ply(in, "<memory>");
}

}  // namespace cranio
