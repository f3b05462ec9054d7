// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

// Known limitation: warping only moves input colors by a bounded amount, so
// label pixels far from any visible input surface cannot be filled by
// displacement alone.

#include <doctest.h>

#include <cmath>
#include <random>

#include "nist/network.hpp"

namespace {

// Input sees a small disk; the label claims a much larger one, as when most
// of a silhouette is hidden in the coarse rendering.
nist::GBufferFrame partial_visibility_frame(int size) {
  nist::GBufferFrame f;
  f.width = f.height = size;
  const std::size_t n = f.pixels();
  f.color.assign(3 * n, 0.5f);
  f.label.assign(3 * n, 0.5f);
  f.depth.assign(n, 1.0f);
  f.gnormal.assign(3 * n, 0.0f);
  f.snormal.assign(3 * n, 0.0f);
  f.coverage.assign(n, 0.0f);
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x + 0.5 - c, y + 0.5 - c);
      const std::size_t i = static_cast<std::size_t>(y) * size + x;
      if (r < 6.0) {
        f.coverage[i] = 1.0f;
        f.depth[i] = 0.4f;
        f.gnormal[3 * i + 2] = f.snormal[3 * i + 2] = 1.0f;
        f.color[3 * i] = 1.0f;
        f.color[3 * i + 1] = f.color[3 * i + 2] = 0.0f;
      }
      if (r < 24.0) {
        f.label[3 * i] = 1.0f;
        f.label[3 * i + 1] = f.label[3 * i + 2] = 0.0f;
      }
    }
  return f;
}

} // namespace

TEST_CASE("flow reach is bounded regardless of weights") {
  nist::ModelConfig c;
  c.guidance_channels = c.deform_channels = c.color_channels = 4;
  const int size = 64;
  const nist::GBufferFrame frame = partial_visibility_frame(size);
  const auto input = nist::make_input<float>({&frame});

  // each flow component is bounded separately, and bilinear taps reach one
  // pixel past the displaced position
  const double reach_norm = c.scales * c.flow_scale;
  const double reach_px = std::sqrt(2.0) * (reach_norm * (size - 1) / 2.0 + 1.0);

  std::size_t unreachable = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x + 0.5 - size / 2.0, y + 0.5 - size / 2.0);
      if (r < 24.0 && r > 6.0 + reach_px + 1.0) ++unreachable;
    }
  REQUIRE(unreachable > 500);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 4; ++trial) {
    nist::Network<float> net(c, 100 + trial);
    // saturate every flow head with large random weights and biases
    for (int t = 1; t <= c.scales; ++t) {
      const std::string p = "s" + std::to_string(t) + ".flow.b.";
      for (auto& w : net.parameter(p + "weight").mutable_data()) w = static_cast<float>(static_cast<int>(rng() % 201) - 100);
      for (auto& b : net.parameter(p + "bias").mutable_data()) b = (rng() & 1) ? 50.0f : -50.0f;
    }
    nist::ad::NoGradGuard guard;
    const auto out = net.forward(input);
    double max_flow = 0.0;
    for (float v : out.full_res_flow.data()) max_flow = std::max(max_flow, std::abs(static_cast<double>(v)));
    CHECK(max_flow <= reach_norm + 1e-6);
    CHECK(max_flow > 0.5 * c.flow_scale);

    const auto warped = nist::ad::grid_sample_bilinear(input.color, out.full_res_flow);
    const auto w = warped.data();
    const std::size_t hw = static_cast<std::size_t>(size) * size;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double r = std::hypot(x + 0.5 - size / 2.0, y + 0.5 - size / 2.0);
        if (r < 24.0 && r > 6.0 + reach_px + 1.0) {
          const std::size_t i = static_cast<std::size_t>(y) * size + x;
          // the label wants red here but only background can arrive
          CHECK(w[i] == doctest::Approx(0.5f));
          CHECK(w[hw + i] == doctest::Approx(0.5f));
        }
      }
  }
}
