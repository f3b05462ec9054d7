// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nist/tensor.hpp"

namespace nist {

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5; // decoupled: p -= lr * wd * p
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  bool operator==(const AdamConfig&) const = default;
};

template <typename T> class Adam {
public:
  using ParamList = std::vector<std::pair<std::string, ad::Tensor<T>>>;

  Adam(const ParamList& params, const AdamConfig& config);

  /// One update from the accumulated gradients. Throws naming the first
  /// parameter that has no gradient buffer.
  void step();
  long steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

private:
  ParamList params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  long step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

} // namespace nist
