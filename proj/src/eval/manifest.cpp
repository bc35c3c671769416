// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/eval/manifest.hpp"

#include "cranio/error.hpp"
#include "cranio/util/hash.hpp"

#include <fstream>

namespace cranio {

namespace fs = std::filesystem;

namespace {

void hash_into(const fs::path& path, std::map<std::string, std::string>& out) {
  if (fs::is_directory(path)) {
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) out[e.path().generic_string()] = sha256_file(e.path());
    }
  } else if (fs::is_regular_file(path)) {
    out[path.generic_string()] = sha256_file(path);
  } else {
    throw IoError("cannot hash missing path " + path.string());
  }
}

}  // namespace

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)) {}

void RunManifest::set_config(const nlohmann::json& config) {
  config_ = config;
  config_hash_ = sha256_hex(config.dump());
}

void RunManifest::add_input(const fs::path& path) { hash_into(path, inputs_); }
void RunManifest::add_output(const fs::path& path) { hash_into(path, outputs_); }
void RunManifest::set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j = {{"command", command_},
                      {"argv", argv_},
                      {"version", kVersion},
                      {"config", config_},
                      {"config_hash", config_hash_},
                      {"inputs", inputs_},
                      {"outputs", outputs_}};
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  return j;
}

void RunManifest::write(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

}  // namespace cranio
