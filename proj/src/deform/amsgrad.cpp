// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#include "cranio/deform/amsgrad.hpp"

#include "cranio/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cranio {

void AmsGradState::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  v_max.assign(n, 0.0);
  step = 0;
}

void amsgrad_step(AmsGradState& s, std::span<const double> g, std::span<double> x, double lr) {
  if (g.size() != s.size() || x.size() != s.size()) {
    throw ValidationError("optimizer state has " + std::to_string(s.size()) +
                          " entries, gradient " + std::to_string(g.size()) + ", parameters " +
                          std::to_string(x.size()));
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double sqrt_bc2 = std::sqrt(1.0 - std::pow(s.beta2, static_cast<double>(s.step)));
  const double step_size = lr / bc1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
    s.v_max[i] = std::max(s.v_max[i], s.v[i]);
    const double denom = std::sqrt(s.v_max[i]) / sqrt_bc2 + s.eps;
    x[i] -= step_size * s.m[i] / denom;
  }
}

}  // namespace cranio
