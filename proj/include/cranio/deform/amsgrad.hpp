// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cranio {

/// Adaptive-moment optimizer state with the max-tracked second moment.
/// Bias correction follows the common deep-learning convention: the running
/// maximum is kept over the raw second moment and corrected at use.
struct AmsGradState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> v_max;
  long long step = 0;

  explicit AmsGradState(std::size_t n = 0) { reset(n); }
  void reset(std::size_t n);
  std::size_t size() const { return m.size(); }
};

/// One update of `params` in place. Throws ValidationError when the sizes of
/// state, gradient and parameters disagree.
void amsgrad_step(AmsGradState& state, std::span<const double> gradient, std::span<double> params,
                  double learning_rate);

}  // namespace cranio
