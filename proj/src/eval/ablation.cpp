// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/eval/ablation.hpp"

#include "cranio/error.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace cranio {

const AblationCell& AblationTable::at(int origin_stride, int q) const {
  for (const AblationCell& c : cells) {
    if (c.origin_stride == origin_stride && c.n_q == q) return c;
  }
  throw ValidationError("no ablation cell for stride " + std::to_string(origin_stride) +
                        ", n_q " + std::to_string(q));
}

AblationTable run_ablation(const TemplateSet& templates, const std::vector<AblationCase>& cases,
                           const DeformConfig& skull_config, const AblationConfig& grid) {
  if (cases.empty()) throw ValidationError("ablation corpus is empty");
  AblationTable table;
  table.origin_strides = grid.origin_strides;
  table.n_q = grid.n_q;
  const std::size_t nf = templates.face.vertices.size();
  for (int s : grid.origin_strides) {
    for (int q : grid.n_q) {
      AblationCell c;
      c.origin_stride = s;
      c.origins = (nf + static_cast<std::size_t>(s) - 1) / static_cast<std::size_t>(s);
      c.n_q = q;
      c.per_case.assign(cases.size(), std::numeric_limits<double>::quiet_NaN());
      table.cells.push_back(std::move(c));
    }
  }

  const std::size_t jobs = table.cells.size() * cases.size();
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      AblationCell& cell = table.cells[job / cases.size()];
      const std::size_t ci = job % cases.size();
      const AblationCase& c = cases[ci];
      try {
        const SkullRegistration reg =
            register_skull(c.face, c.skull_ct, templates.face, templates.skull,
                           templates.face_landmarks, skull_config, {cell.n_q, cell.origin_stride});
        cell.per_case[ci] = nrmse(reg.mesh.vertices, c.skull_truth);
      } catch (const Error& e) {
        const std::lock_guard lock(mutex);
        if (cell.first_error.empty()) cell.first_error = c.id + ": " + e.what();
      }
    }
  };
  int threads = grid.threads > 0 ? grid.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  for (AblationCell& cell : table.cells) {
    double sum = 0.0;
    for (double v : cell.per_case) {
      if (std::isnan(v)) ++cell.failed;
      sum += v;
    }
    cell.nrmse = cell.failed ? std::numeric_limits<double>::quiet_NaN()
                             : sum / static_cast<double>(cell.per_case.size());
  }
  return table;
}

std::string ablation_csv(const AblationTable& table, std::size_t face_vertices) {
  std::ostringstream out;
  out << "n_o,origins";
  for (int q : table.n_q) out << ",n_q=" << q;
  out << '\n' << std::setprecision(6);
  for (int s : table.origin_strides) {
    out << (s == 1 ? std::string("N_F") : "N_F/" + std::to_string(s)) << ','
        << (face_vertices + static_cast<std::size_t>(s) - 1) / static_cast<std::size_t>(s);
    for (int q : table.n_q) {
      const double v = table.at(s, q).nrmse;
      out << ',';
      if (std::isnan(v)) out << "nan";
      else out << v;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cranio
