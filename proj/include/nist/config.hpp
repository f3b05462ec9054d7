// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nist/mesh.hpp"
#include "nist/raster.hpp"
#include "nist/train.hpp"

namespace nist {

/// Everything a CLI run can be configured with.
struct RunConfig {
  // scene and dataset
  std::string scene = "icosphere1";
  std::string material = "flat"; // flat | checker
  double ambient = 0.25;
  double background = 0.5;
  std::uint64_t light_seed = 0; // nonzero jitters the light per frame
  int frames = 200;
  int width = 128;
  int height = 128;
  TessellationConfig tess{6, 0.75};
  std::uint64_t data_seed = 7;
  // model, losses, optimizer, loop
  TrainConfig train;

  SceneSpec scene_spec() const;
  void validate() const;
};

/// Keys accepted by apply_setting, in documentation order.
const std::vector<std::string>& config_keys();

/// Sets one key; throws std::invalid_argument naming the key for unknown
/// keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// "key=value" lines; blank lines and lines starting with '#' are skipped.
/// Errors name the file and line.
void load_config_file(const std::filesystem::path& path, RunConfig& config);

/// Splits "key=value".
std::pair<std::string, std::string> split_setting(const std::string& text);

/// Parses "WxH".
std::pair<int, int> parse_resolution(const std::string& text);

} // namespace nist
