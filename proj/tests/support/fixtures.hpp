// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cranio/models/models.hpp"
#include "cranio/synth/generator.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace cranio::testing {

/// Desk-scale templates, built once per process.
const synth::HeadTemplates& head_templates();
const TemplateSet& template_set();

/// Regular grid over [0, w] x [0, h] in the z = 0 plane.
TriMesh grid_plane(int cols, int rows, double w, double h);
/// Unit icosphere scaled to `radius` after `subdivisions` refinements.
TriMesh icosphere(int subdivisions, double radius);

Mat3 random_rotation(std::mt19937_64& rng);

/// Synthetic corpus, generated once per (n, seed).
const std::vector<synth::SynthCase>& corpus(int n, std::uint64_t seed = 3);

/// Ground-truth surfaces packaged like registration output, with tissue rays
/// cast on the ground truth itself (n_q = 3, every face vertex).
RegistrationCase truth_case(const synth::SynthCase& c);
std::vector<RegistrationCase> truth_cases(int n, std::uint64_t seed = 3);

/// Fresh empty directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace cranio::testing
