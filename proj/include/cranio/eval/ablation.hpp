// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/eval/config.hpp"

#include <string>
#include <vector>

namespace cranio {

/// A subject with its registered face, raw skull and ground-truth skull
/// (template topology).
struct AblationCase {
  std::string id;
  TriMesh face;
  TriMesh skull_ct;
  TriMesh skull_truth;
};

struct AblationCell {
  int origin_stride = 1;
  std::size_t origins = 0;
  int n_q = 3;
  /// Mean skull NRMSE over the corpus; NaN when any case failed.
  double nrmse = 0.0;
  std::vector<double> per_case;
  std::size_t failed = 0;
  std::string first_error;
};

struct AblationTable {
  std::vector<int> origin_strides;
  std::vector<int> n_q;
  /// Row-major over (stride, n_q).
  std::vector<AblationCell> cells;

  const AblationCell& at(int origin_stride, int n_q) const;
};

/// Registers every case's skull for each (origin stride, n_q) cell and
/// scores it against the ground truth. Cases run as parallel jobs.
AblationTable run_ablation(const TemplateSet& templates, const std::vector<AblationCase>& cases,
                           const DeformConfig& skull_config, const AblationConfig& grid);

/// One row per origin count, one column per n_q.
std::string ablation_csv(const AblationTable& table, std::size_t face_vertices);

}  // namespace cranio
