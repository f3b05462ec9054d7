// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nist::ad {

GradCheckResult grad_check(const ScalarFn& f, std::vector<Tensor<double>> inputs,
                           const GradCheckOptions& options) {
  for (auto& t : inputs) {
    if (!t.is_leaf() || !t.requires_grad()) {
      throw std::invalid_argument("grad_check inputs must be requires_grad leaves");
    }
    t.zero_grad();
  }
  const Tensor<double> loss = f(inputs);
  backward(loss);

  std::vector<std::pair<std::size_t, std::size_t>> elements;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) elements.emplace_back(k, i);
  if (elements.size() > options.max_elements) {
    std::mt19937_64 rng(options.seed);
    // partial Fisher-Yates with an explicit index draw for cross-platform stability
    for (std::size_t i = 0; i < options.max_elements; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (elements.size() - i));
      std::swap(elements[i], elements[j]);
    }
    elements.resize(options.max_elements);
  }

  GradCheckResult result;
  NoGradGuard guard;
  for (const auto& [k, i] : elements) {
    auto data = inputs[k].mutable_data();
    const double saved = data[i];
    data[i] = saved + options.eps;
    const double up = f(inputs).item();
    data[i] = saved - options.eps;
    const double down = f(inputs).item();
    data[i] = saved;
    const double numeric = (up - down) / (2.0 * options.eps);
    const double analytic = inputs[k].has_grad() ? inputs[k].grad()[i] : 0.0;
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double err = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (!(err <= result.max_rel_error)) {
      result.max_rel_error = std::isnan(err) ? INFINITY : err;
      result.worst_input = k;
      result.worst_index = i;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

} // namespace nist::ad
