// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nist {

using ad::Node;
using ad::Tensor;

namespace {

template <typename T> T sign(T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); }

void require_same(const ad::Shape& a, const ad::Shape& b, const char* op) {
  if (a != b) {
    throw ad::ShapeError(std::string(op) + ": shape mismatch " + ad::to_string(a) + " vs " + ad::to_string(b));
  }
}

void require_image(const ad::Shape& s, const char* op) {
  if (s.size() != 4) throw ad::ShapeError(std::string(op) + ": expected B x C x H x W, got " + ad::to_string(s));
}

// One pyramid level of the gradient-domain loss, differentiable in pred.
template <typename T> Tensor<T> gradient_l1(const Tensor<T>& pred, const Tensor<T>& label) {
  const int B = pred.dim(0), C = pred.dim(1), H = pred.dim(2), W = pred.dim(3);
  const auto p = pred.data();
  const auto l = label.data();
  const std::size_t nx = static_cast<std::size_t>(B) * C * H * (W - 1);
  const std::size_t ny = static_cast<std::size_t>(B) * C * (H - 1) * W;
  double sx = 0.0, sy = 0.0;
  auto at = [W, H](int plane, int y, int x) {
    return (static_cast<std::size_t>(plane) * H + y) * W + x;
  };
  for (int plane = 0; plane < B * C; ++plane)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t i = at(plane, y, x);
        if (x + 1 < W) sx += std::abs((p[i + 1] - p[i]) - (l[i + 1] - l[i]));
        if (y + 1 < H) sy += std::abs((p[i + W] - p[i]) - (l[i + W] - l[i]));
      }
  const double wx = nx ? 1.0 / static_cast<double>(nx) : 0.0;
  const double wy = ny ? 1.0 / static_cast<double>(ny) : 0.0;
  const T value = static_cast<T>(sx * wx + sy * wy);
  return ad::detail::record<T>("loss_percep_level", {}, {value}, {pred, label.detach()},
                               [B, C, H, W, wx, wy, at](Node<T>& self) {
    auto& pn = *self.parents[0];
    const auto& ln = *self.parents[1];
    auto& g = pn.ensure_grad();
    const T gx = static_cast<T>(self.grad[0] * wx), gy = static_cast<T>(self.grad[0] * wy);
    for (int plane = 0; plane < B * C; ++plane)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const std::size_t i = at(plane, y, x);
          if (x + 1 < W) {
            const T s = sign((pn.data[i + 1] - pn.data[i]) - (ln.data[i + 1] - ln.data[i])) * gx;
            g[i + 1] += s;
            g[i] -= s;
          }
          if (y + 1 < H) {
            const T s = sign((pn.data[i + W] - pn.data[i]) - (ln.data[i + W] - ln.data[i])) * gy;
            g[i + W] += s;
            g[i] -= s;
          }
        }
  });
}

} // namespace

void LossConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("loss epsilon must be > 0");
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw std::invalid_argument("k_fraction must lie in (0, 1]");
  if (!(lambda_rr >= 0.0 && lambda_shade >= 0.0 && lambda_percep >= 0.0)) {
    throw std::invalid_argument("loss weights must be nonnegative");
  }
}

LossConfig LossConfig::preset(const std::string& name) {
  LossConfig c;
  if (name == "reference") {
    c.epsilon = 1e-6;
    c.lambda_percep = 30.0;
  } else if (name != "desk") {
    throw std::invalid_argument("unknown loss preset '" + name + "' (expected reference or desk)");
  }
  return c;
}

std::size_t shade_k(const LossConfig& config, std::size_t pixels) {
  const auto k = static_cast<std::size_t>(std::ceil(config.k_fraction * static_cast<double>(pixels)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(pixels, 1));
}

template <typename T>
Tensor<T> loss_rr(const Tensor<T>& pred, const Tensor<T>& label, const Tensor<T>& input, double epsilon) {
  require_same(pred.shape(), label.shape(), "loss_rr");
  require_same(pred.shape(), input.shape(), "loss_rr");
  if (pred.numel() == 0) throw ad::ShapeError("loss_rr: empty images");
  const std::size_t n = pred.numel();
  std::vector<T> weight(n);
  double total = 0.0;
  const auto p = pred.data(), l = label.data(), in = input.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / (std::abs(static_cast<double>(l[i]) - in[i]) + epsilon);
    weight[i] = static_cast<T>(w);
    total += std::abs(static_cast<double>(p[i]) - l[i]) * w;
  }
  const double inv = 1.0 / static_cast<double>(n);
  return ad::detail::record<T>("loss_rr", {}, {static_cast<T>(total * inv)}, {pred, label.detach()},
                               [weight = std::move(weight), inv](Node<T>& self) {
    auto& pn = *self.parents[0];
    const auto& ln = *self.parents[1];
    auto& g = pn.ensure_grad();
    const double scale = self.grad[0] * inv;
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += static_cast<T>(sign(pn.data[i] - ln.data[i]) * weight[i] * scale);
  });
}

template <typename T> Tensor<T> loss_shade(const Tensor<T>& pred, const Tensor<T>& label, std::size_t k) {
  require_same(pred.shape(), label.shape(), "loss_shade");
  require_image(pred.shape(), "loss_shade");
  const int B = pred.dim(0), C = pred.dim(1);
  const std::size_t hw = static_cast<std::size_t>(pred.dim(2)) * pred.dim(3);
  const std::size_t pixels = static_cast<std::size_t>(B) * hw;
  if (pixels == 0 || C == 0) throw ad::ShapeError("loss_shade: empty images");
  k = std::clamp<std::size_t>(k, 1, pixels);
  const auto p = pred.data(), l = label.data();
  std::vector<double> residual(pixels, 0.0);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t e = (static_cast<std::size_t>(b) * C + c) * hw + i;
        residual[b * hw + i] += std::abs(static_cast<double>(p[e]) - l[e]);
      }
  for (auto& r : residual) r /= C;
  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return residual[a] != residual[b] ? residual[a] > residual[b] : a < b;
                    });
  order.resize(k);
  std::sort(order.begin(), order.end());
  double total = 0.0;
  for (std::size_t i : order) total += residual[i];
  const double inv = 1.0 / (static_cast<double>(k) * C);
  return ad::detail::record<T>("loss_shade", {}, {static_cast<T>(total / static_cast<double>(k))},
                               {pred, label.detach()},
                               [order = std::move(order), inv, C, hw](Node<T>& self) {
    auto& pn = *self.parents[0];
    const auto& ln = *self.parents[1];
    auto& g = pn.ensure_grad();
    const double scale = self.grad[0] * inv;
    for (std::size_t pix : order) {
      const std::size_t b = pix / hw, i = pix % hw;
      for (int c = 0; c < C; ++c) {
        const std::size_t e = (b * C + c) * hw + i;
        g[e] += static_cast<T>(sign(pn.data[e] - ln.data[e]) * scale);
      }
    }
  });
}

template <typename T> Tensor<T> loss_percep(const Tensor<T>& pred, const Tensor<T>& label) {
  require_same(pred.shape(), label.shape(), "loss_percep");
  require_image(pred.shape(), "loss_percep");
  Tensor<T> p = pred, l = label.detach();
  Tensor<T> total = gradient_l1(p, l);
  for (int level = 1; level < 3; ++level) {
    // coarser levels exist only while both dims stay even
    if (p.dim(2) % 2 || p.dim(3) % 2 || p.dim(2) < 4 || p.dim(3) < 4) break;
    p = ad::downsample2(p);
    l = ad::downsample2(l);
    total = ad::add(total, gradient_l1(p, l));
  }
  return total;
}

template <typename T>
LossBreakdown<T> total_loss(const Tensor<T>& pred, const Tensor<T>& label, const Tensor<T>& input,
                            const LossConfig& config) {
  config.validate();
  require_image(pred.shape(), "total_loss");
  const std::size_t pixels = static_cast<std::size_t>(pred.dim(0)) * pred.dim(2) * pred.dim(3);
  const Tensor<T> rr = loss_rr(pred, label, input, config.epsilon);
  const Tensor<T> shade = loss_shade(pred, label, shade_k(config, pixels));
  const Tensor<T> percep = loss_percep(pred, label);
  LossBreakdown<T> out;
  out.rr = rr.item();
  out.shade = shade.item();
  out.percep = percep.item();
  out.total = ad::add(ad::add(ad::scale(rr, static_cast<T>(config.lambda_rr)),
                              ad::scale(shade, static_cast<T>(config.lambda_shade))),
                      ad::scale(percep, static_cast<T>(config.lambda_percep)));
  return out;
}

#define NIST_INSTANTIATE_LOSSES(T)                                                                \
  template Tensor<T> loss_rr(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);       \
  template Tensor<T> loss_shade(const Tensor<T>&, const Tensor<T>&, std::size_t);                 \
  template Tensor<T> loss_percep(const Tensor<T>&, const Tensor<T>&);                             \
  template LossBreakdown<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                       const LossConfig&);

NIST_INSTANTIATE_LOSSES(float)
NIST_INSTANTIATE_LOSSES(double)

} // namespace nist
