// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nist/adam.hpp"
#include "nist/dataset.hpp"
#include "nist/evaluation.hpp"
#include "nist/losses.hpp"
#include "nist/network.hpp"

namespace nist {

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  AdamConfig adam;
  int steps = 2000;
  int batch_size = 2;
  std::uint64_t seed = 7;
  int crop = 128;
  /// Probability that a crop is centered on a silhouette pixel.
  double silhouette_bias = 0.8;
  /// Intermediate checkpoint period in steps; 0 writes only the final one.
  int checkpoint_interval = 500;
  SilhouetteConfig silhouette;

  void validate() const;
};

/// Ablation names: full, no_deform, no_warp, no_percep.
TrainConfig make_ablation(const TrainConfig& base, const std::string& variant);
inline const std::vector<std::string> kAblations = {"full", "no_deform", "no_warp", "no_percep"};

struct StepRecord {
  int step = 0; // 1-based
  double total = 0.0;
  double rr = 0.0;
  double shade = 0.0;
  double percep = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint; // out_dir / final.ckpt
  std::filesystem::path trace;      // out_dir / trace.txt
  std::vector<StepRecord> records;
};

/// Trains from scratch on `data`. Writes trace.txt ("step total rr shade
/// percep" per line), checkpoint_%06d.ckpt every checkpoint_interval steps
/// and final.ckpt. Aborts with the step index on a non-finite loss.
TrainResult train(const Manifest& data, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const std::function<void(const StepRecord&)>& progress = {});

/// Crop origin for one sample; exposed for tests.
Crop choose_crop(int width, int height, int crop_w, int crop_h, const std::vector<std::uint32_t>& silhouette_pixels,
                 double silhouette_bias, std::mt19937_64& rng);

} // namespace nist
