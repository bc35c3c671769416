// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/geometry/mesh.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace cranio {

enum class MeshFormat { Obj, Ply };

struct PlyOptions {
  bool binary = true;
  /// float64 coordinates give bit-identical round trips; float32 halves the size.
  bool double_precision = true;
};

struct SaveReport {
  /// Set when the mesh carried albedo but the format cannot store it (OBJ).
  bool albedo_dropped = false;
};

/// Format from the file extension (.obj / .ply, case-insensitive).
MeshFormat format_from_path(const std::filesystem::path& path);

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriMesh load_mesh(const std::filesystem::path& path);

SaveReport save_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format,
                     const PlyOptions& options = {});
SaveReport save_mesh(const TriMesh& mesh, const std::filesystem::path& path,
                     const PlyOptions& options = {});

// Stream variants; `name` is only used in error messages.
TriMesh read_ply(std::istream& in, const std::string& name);
TriMesh read_obj(std::istream& in, const std::string& name);
void write_ply(const TriMesh& mesh, std::ostream& out, const PlyOptions& options = {});
SaveReport write_obj(const TriMesh& mesh, std::ostream& out);

std::string to_ply_bytes(const TriMesh& mesh, const PlyOptions& options = {});
TriMesh from_ply_bytes(const std::string& bytes);

}  // namespace cranio
