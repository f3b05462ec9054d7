// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace nist {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be > 0");
}

template <typename T>
Adam<T>::Adam(const ParamList& params, const AdamConfig& config) : params_(params), config_(config) {
  config_.validate();
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

template <typename T> void Adam<T>::step() {
  for (const auto& [name, p] : params_) {
    if (!p.has_grad()) throw std::runtime_error("parameter '" + name + "' has no gradient");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Tensor<T>& p = params_[k].second;
    const auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      const double wi = w[i];
      w[i] = static_cast<T>(wi - config_.lr * update - config_.lr * config_.weight_decay * wi);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

} // namespace nist
