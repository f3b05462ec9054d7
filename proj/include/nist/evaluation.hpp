// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nist/dataset.hpp"
#include "nist/network.hpp"

namespace nist {

struct SilhouetteConfig {
  double angle_degrees = 30.0;
  int radius = 3; // square structuring element of side 2 * radius + 1
};

/// Pixels where coverage changes between 4-neighbors, or where two adjacent
/// covered pixels have geometric normals more than `angle_degrees` apart,
/// dilated by `radius`. One byte per pixel, row 0 at the top.
std::vector<std::uint8_t> silhouette_mask(const RasterOutput& frame, const SilhouetteConfig& config = {});

inline constexpr double kPsnrCap = 99.0;

/// PSNR for images in [0, 1] with `channels` interleaved values per pixel.
/// The optional per-pixel mask restricts the MSE domain; an empty mask is an
/// error. Identical images report kPsnrCap.
double psnr(std::span<const float> a, std::span<const float> b, int channels,
            std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

/// Mean absolute error over masked pixels and all channels.
double masked_l1(std::span<const float> a, std::span<const float> b, int channels,
                 std::span<const std::uint8_t> mask);

struct FrameMetrics {
  std::string frame;
  double psnr_full = 0.0;
  double psnr_sil = 0.0;
  double l1_sil = 0.0;
  double baseline_l1_sil = 0.0;
  double ratio = 0.0; // l1_sil / baseline_l1_sil
};

struct EvalReport {
  std::string name;
  std::string manifest_id; // identifies the test set for comparisons
  std::vector<FrameMetrics> frames;
  FrameMetrics aggregate;  // field-wise means over frames, frame = "mean"
  double max_abs_flow = 0.0; // largest |v| component over all scales and frames
};

struct EvalOptions {
  SilhouetteConfig silhouette;
  /// Substitute the label for the prediction (harness check).
  bool oracle_label = false;
};

/// Runs the network on every frame of `manifest` at full resolution.
/// `net` may be null only in oracle-label mode.
EvalReport evaluate(const Network<float>* net, const Manifest& manifest, const EvalOptions& options = {},
                    const std::string& name = "model");

/// Per-frame metrics for an already computed prediction.
FrameMetrics frame_metrics(const GBufferFrame& frame, std::span<const float> prediction,
                           const SilhouetteConfig& config = {});

std::string manifest_id(const Manifest& manifest);

/// report.txt and report.csv; the CSV ends with the aggregate row.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

struct AblationTable {
  /// Aggregate metrics with `frame` holding the report name; ascending
  /// l1_sil, ties by name.
  std::vector<FrameMetrics> ranked;
  std::string text;
  std::string csv;
};

AblationTable compare_ablations(const std::vector<EvalReport>& reports);

} // namespace nist
