// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/eval/config.hpp"

#include "cranio/error.hpp"
#include "cranio/util/hash.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace cranio {

namespace {

void check_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

std::string storage_name(StorageType s) { return s == StorageType::Float64 ? "float64" : "float32"; }

}  // namespace

void PipelineConfig::validate() const {
  if (version != kConfigVersion) {
    throw ValidationError("unsupported config version " + std::to_string(version));
  }
  registration.init.validate();
  registration.face.validate();
  registration.skull.validate();
  const PredictOptions& p = surgery.predict;
  if (p.n_q < 1) throw ValidationError("surgery n_q must be positive");
  if (!(p.fit.lambda > 0.0) || !(p.fit.mu > 0.0)) {
    throw ValidationError("surgery fit weights must be positive");
  }
  if (!(p.fit.min_coverage >= 0.0 && p.fit.min_coverage <= 1.0)) {
    throw ValidationError("surgery min_coverage must lie in [0, 1]");
  }
  if (!std::isfinite(p.ridge)) throw ValidationError("surgery ridge must be finite");
  if (!(surgery.band_mm >= 0.0)) throw ValidationError("surgery band must be non-negative");
  if (!(metrics.recall_tau > 0.0)) throw ValidationError("recall tau must be positive");
  if (!(metrics.crop_margin >= 0.0)) throw ValidationError("crop margin must be non-negative");
  if (ablation.origin_strides.empty() || ablation.n_q.empty()) {
    throw ValidationError("ablation grid must not be empty");
  }
  for (int s : ablation.origin_strides) {
    if (s < 1) throw ValidationError("ablation origin strides must be positive");
  }
  for (int q : ablation.n_q) {
    if (q < 1) throw ValidationError("ablation n_q values must be positive");
  }
  if (ablation.threads < 0) throw ValidationError("ablation threads must be non-negative");
  if (synth.cases < 2) throw ValidationError("synthetic corpus needs at least 2 cases");
}

std::string PipelineConfig::hash() const {
  const nlohmann::json j = *this;
  return sha256_hex(j.dump());
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  const PredictOptions& p = c.surgery.predict;
  j = {{"version", c.version},
       {"registration", c.registration},
       {"models", {{"n_id", c.models.n_id},
                   {"n_alb", c.models.n_alb},
                   {"n_ti", c.models.n_ti},
                   {"flip_augment", c.models.flip_augment},
                   {"storage", storage_name(c.models.storage)}}},
       {"surgery", {{"n_q", p.n_q},
                    {"anchor_offset", p.anchor_offset},
                    {"regularize_tissue", p.regularize_tissue},
                    {"ridge", p.ridge},
                    {"lambda", p.fit.lambda},
                    {"mu", p.fit.mu},
                    {"min_coverage", p.fit.min_coverage},
                    {"band_mm", c.surgery.band_mm}}},
       {"metrics", {{"recall_tau", c.metrics.recall_tau}, {"crop_margin", c.metrics.crop_margin}}},
       {"ablation", {{"origin_strides", c.ablation.origin_strides},
                     {"n_q", c.ablation.n_q},
                     {"threads", c.ablation.threads}}},
       {"synth", {{"cases", c.synth.cases}, {"seed", c.synth.seed}}}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  check_keys(j, {"version", "registration", "models", "surgery", "metrics", "ablation", "synth"},
             "config");
  try {
    read(j, "version", c.version);
    if (j.contains("registration")) from_json(j.at("registration"), c.registration);
    if (j.contains("models")) {
      const auto& m = j.at("models");
      check_keys(m, {"n_id", "n_alb", "n_ti", "flip_augment", "storage"}, "models");
      read(m, "n_id", c.models.n_id);
      read(m, "n_alb", c.models.n_alb);
      read(m, "n_ti", c.models.n_ti);
      read(m, "flip_augment", c.models.flip_augment);
      if (m.contains("storage")) {
        const auto s = m.at("storage").get<std::string>();
        if (s == "float32") c.models.storage = StorageType::Float32;
        else if (s == "float64") c.models.storage = StorageType::Float64;
        else throw ValidationError("models.storage must be float32 or float64, got '" + s + "'");
      }
    }
    if (j.contains("surgery")) {
      const auto& s = j.at("surgery");
      check_keys(s, {"n_q", "anchor_offset", "regularize_tissue", "ridge", "lambda", "mu",
                     "min_coverage", "band_mm"},
                 "surgery");
      PredictOptions& p = c.surgery.predict;
      read(s, "n_q", p.n_q);
      read(s, "anchor_offset", p.anchor_offset);
      read(s, "regularize_tissue", p.regularize_tissue);
      read(s, "ridge", p.ridge);
      read(s, "lambda", p.fit.lambda);
      read(s, "mu", p.fit.mu);
      read(s, "min_coverage", p.fit.min_coverage);
      read(s, "band_mm", c.surgery.band_mm);
    }
    if (j.contains("metrics")) {
      const auto& m = j.at("metrics");
      check_keys(m, {"recall_tau", "crop_margin"}, "metrics");
      read(m, "recall_tau", c.metrics.recall_tau);
      read(m, "crop_margin", c.metrics.crop_margin);
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      check_keys(a, {"origin_strides", "n_q", "threads"}, "ablation");
      read(a, "origin_strides", c.ablation.origin_strides);
      read(a, "n_q", c.ablation.n_q);
      read(a, "threads", c.ablation.threads);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      check_keys(s, {"cases", "seed"}, "synth");
      read(s, "cases", c.synth.cases);
      read(s, "seed", c.synth.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config: ") + e.what());
  }
  c.validate();
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), e.byte, false, e.what());
  }
  return j.get<PipelineConfig>();
}

}  // namespace cranio
