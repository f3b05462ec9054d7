// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "nist/tensor.hpp"

namespace nist {

struct LossConfig {
  /// 1e-6 (the "reference" preset) lets pixels where label == input
  /// (all background) outweigh silhouettes by about six orders of magnitude.
  double epsilon = 1e-2;
  double k_fraction = 0.01;
  double lambda_rr = 0.1;
  double lambda_shade = 10.0;
  double lambda_percep = 1.0;

  void validate() const;
  /// "reference" (epsilon 1e-6, weights 0.1 / 10 / 30) or "desk" (the defaults:
  /// epsilon 1e-2, weights 0.1 / 10 / 1).
  static LossConfig preset(const std::string& name);
  bool operator==(const LossConfig&) const = default;
};

/// Residual-relative L1: mean over all elements of |pred - label| / (|label - input| + epsilon).
template <typename T>
ad::Tensor<T> loss_rr(const ad::Tensor<T>& pred, const ad::Tensor<T>& label, const ad::Tensor<T>& input,
                      double epsilon);

/// Mean of the k largest per-pixel residuals (channel-mean absolute error),
/// pooled over the whole batch. Ties go to the lower pixel index; k is
/// clamped to [1, pixel count].
template <typename T>
ad::Tensor<T> loss_shade(const ad::Tensor<T>& pred, const ad::Tensor<T>& label, std::size_t k);

/// Gradient-domain stand-in for a learned perceptual metric: over three
/// pyramid levels, mean |dx(pred) - dx(label)| + mean |dy(pred) - dy(label)|
/// with forward differences.
template <typename T> ad::Tensor<T> loss_percep(const ad::Tensor<T>& pred, const ad::Tensor<T>& label);

/// Top-k size for an image batch under `config`.
std::size_t shade_k(const LossConfig& config, std::size_t pixels);

template <typename T> struct LossBreakdown {
  ad::Tensor<T> total;
  double rr = 0.0;
  double shade = 0.0;
  double percep = 0.0;
};

template <typename T>
LossBreakdown<T> total_loss(const ad::Tensor<T>& pred, const ad::Tensor<T>& label, const ad::Tensor<T>& input,
                            const LossConfig& config);

} // namespace nist
