// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nist/tensor.hpp"

namespace nist::ad {

using ScalarFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradCheckOptions {
  double eps = 1e-4;
  /// Above this many elements in total a seeded random subset is checked.
  std::size_t max_elements = 10000;
  std::uint64_t seed = 0;
  /// Denominator floor: error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences. `inputs` must be requires_grad leaves; they are perturbed in
/// place and restored.
GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options = {});

} // namespace nist::ad
