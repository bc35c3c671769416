// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/eval/metrics.hpp"
#include "cranio/fitting/fitting.hpp"
#include "cranio/models/models.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cranio {

inline constexpr int kConfigVersion = 1;

struct ModelConfig {
  int n_id = 0;   // <= 0: full rank
  int n_alb = 0;
  int n_ti = 0;
  bool flip_augment = true;
  StorageType storage = StorageType::Float32;
};

struct SurgeryConfig {
  PredictOptions predict;
  double band_mm = 5.0;
};

struct MetricConfig {
  double recall_tau = kDefaultRecallTau;
  double crop_margin = kDefaultCropMargin;
};

struct AblationConfig {
  /// Origin strides: 100, 10, 1 give N_O = N_F/100, N_F/10, N_F.
  std::vector<int> origin_strides{100, 10, 1};
  std::vector<int> n_q{1, 3, 5};
  /// Worker threads; 0 uses the hardware concurrency.
  int threads = 0;
};

struct SynthConfig {
  int cases = 20;
  std::uint64_t seed = 1;
};

/// Every tunable of a pipeline run. Missing keys keep their defaults,
/// unknown keys are rejected.
struct PipelineConfig {
  int version = kConfigVersion;
  RegistrationOptions registration;
  ModelConfig models;
  SurgeryConfig surgery;
  MetricConfig metrics;
  AblationConfig ablation;
  SynthConfig synth;

  void validate() const;
  /// SHA-256 of the canonical JSON dump.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace cranio
