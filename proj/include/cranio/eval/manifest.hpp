// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace cranio {

/// Record of one CLI run: command line, resolved config and its hash, and
/// SHA-256 of every input and output file.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  void set_config(const nlohmann::json& config);
  /// Files are hashed directly; directories contribute every regular file
  /// below them, keyed by path.
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_;
  std::string config_hash_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace cranio
