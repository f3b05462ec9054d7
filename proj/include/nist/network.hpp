// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nist/raster.hpp"
#include "nist/tensor.hpp"

namespace nist {

enum class Variant { full, no_deform, no_warp };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  int scales = 3;
  /// Working resolution is the input halved this many times.
  int working_levels = 1;
  int guidance_channels = 32;
  int deform_channels = 32;
  int color_channels = 32;
  double flow_scale = 0.05; // bound on |v| in normalized units
  double leaky_slope = 0.2;
  /// Accumulate flows by true composition (resample the history at the
  /// displaced positions) instead of plain addition.
  bool compose_flow = false;
  Variant variant = Variant::full;

  void validate() const;
  /// Throws std::invalid_argument naming the working-resolution divisibility
  /// requirement when an H x W input cannot be processed.
  void validate_input(int height, int width) const;
  bool operator==(const ModelConfig&) const = default;
};

std::size_t expected_parameter_count(const ModelConfig& config);

/// Network inputs for a batch: color B x 3 x H x W and the geometry stack
/// B x 8 x H x W (gnormal, snormal, depth, coverage).
template <typename T> struct NetworkInput {
  ad::Tensor<T> color;
  ad::Tensor<T> guidance;
};

struct Crop {
  int x = 0;
  int y = 0;
  int width = 0;  // 0 = full frame
  int height = 0;
};

template <typename T>
NetworkInput<T> make_input(const std::vector<const GBufferFrame*>& frames,
                           const std::vector<Crop>& crops = {});

/// Label or input color of a batch as B x 3 x H x W.
template <typename T>
ad::Tensor<T> color_tensor(const std::vector<const GBufferFrame*>& frames, bool label,
                           const std::vector<Crop>& crops = {});

template <typename T> struct Conv {
  ad::Tensor<T> weight;
  ad::Tensor<T> bias;
};

/// Two stacked convolutions with a leaky rectifier between them.
template <typename T> struct DoubleConv {
  Conv<T> first;
  Conv<T> second;
};

template <typename T> struct DeformationOutput {
  ad::Tensor<T> state;     // z_d at this scale
  ad::Tensor<T> attention; // channel-softmax gate, undefined for no_deform
};

template <typename T> struct WarpOutput {
  ad::Tensor<T> flow;       // v at this scale
  ad::Tensor<T> cumulative; // accumulated flow at this scale
  ad::Tensor<T> guidance;   // guidance warped by v
  ad::Tensor<T> color;      // refined color state
};

template <typename T> struct ForwardResult {
  ad::Tensor<T> image; // clamped to [0, 1]
  ad::Tensor<T> raw;   // decoder output before clamping
  std::vector<ad::Tensor<T>> guidance_pyramid; // index 0 = coarsest
  std::vector<ad::Tensor<T>> deform_states;
  std::vector<ad::Tensor<T>> attention;
  std::vector<ad::Tensor<T>> flows;
  std::vector<ad::Tensor<T>> cumulative_flows;
  std::vector<ad::Tensor<T>> warped_guidance;
  ad::Tensor<T> full_res_flow;
};

/// Multi-scale deformation + feature-warping network. Scale t = 1 is the
/// coarsest working level, t = scales the working resolution itself.
template <typename T> class Network {
public:
  /// He-initialized weights, zero biases, and a zero-initialized flow head so
  /// training starts from the identity warp. Deterministic in `seed`.
  Network(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  /// Parameters in a fixed, name-sorted order.
  const std::vector<std::pair<std::string, ad::Tensor<T>>>& parameters() const { return params_; }
  ad::Tensor<T>& parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grad();

  std::vector<ad::Tensor<T>> encode_guidance(const ad::Tensor<T>& guidance) const;
  /// Working-resolution color pyramid, index 0 = coarsest.
  std::vector<ad::Tensor<T>> encode_color(const ad::Tensor<T>& full_res_features) const;
  ad::Tensor<T> encode_full_res_color(const ad::Tensor<T>& color) const;

  /// `t` is 1-based. z_prev is the guidance itself at t = 1, otherwise the
  /// upsampled deformation state of the previous scale.
  DeformationOutput<T> deformation_step(int t, const ad::Tensor<T>& guidance,
                                        const ad::Tensor<T>& z_prev) const;

  /// All inputs already at scale t. `cumulative_prev` is undefined at t = 1.
  WarpOutput<T> warp_step(int t, const ad::Tensor<T>& deform_state, const ad::Tensor<T>& guidance,
                          const ad::Tensor<T>& color_state_prev, const ad::Tensor<T>& encoder_color,
                          const ad::Tensor<T>& cumulative_prev) const;

  ForwardResult<T> forward(const NetworkInput<T>& input) const;

  /// Replaces parameters by name (used by checkpoint loading).
  void assign(const std::string& name, std::vector<T> values);

private:
  DoubleConv<T> make_double(const std::string& name, int in, int mid, int out, int first_kernel,
                            bool zero_second = false);
  ad::Tensor<T> run(const DoubleConv<T>& block, const ad::Tensor<T>& x) const;

  ModelConfig config_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, ad::Tensor<T>>> params_;
  std::map<std::string, std::size_t> index_;

  DoubleConv<T> color_full_;
  std::vector<DoubleConv<T>> color_enc_;    // per scale, coarsest first
  std::vector<DoubleConv<T>> guidance_enc_; // per scale, coarsest first
  struct ScaleBlocks {
    DoubleConv<T> query, key, value, attend, deform; // full variant
    DoubleConv<T> plain;                             // no_deform
    DoubleConv<T> flow;                              // absent for no_warp
    DoubleConv<T> color;
  };
  std::vector<ScaleBlocks> scales_;
  DoubleConv<T> decoder_;
  Conv<T> head_;
};

extern template class Network<float>;
extern template class Network<double>;

} // namespace nist
