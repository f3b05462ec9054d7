// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nist/raster.hpp"

namespace nist {

/// manifest.txt: "seed=<int>", "count=<int>", "res=<W>x<H>" header lines,
/// then one frame directory per line relative to the manifest.
struct Manifest {
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  std::vector<std::string> frames;
  std::filesystem::path root; // directory holding manifest.txt

  std::filesystem::path frame_dir(std::size_t i) const { return root / frames.at(i); }
};

struct OrbitConfig {
  double radius_min = 2.8;
  double radius_max = 3.4;
  double elevation_min = -0.5; // radians
  double elevation_max = 0.6;
  double target_jitter = 0.05;
  double vertical_fov = 0.8;
};

/// Seeded orbit camera for frame `index`.
Camera orbit_camera(std::uint64_t seed, std::size_t index, int width, int height,
                    const OrbitConfig& orbit = {});

void write_frame(const std::filesystem::path& dir, const GBufferFrame& frame);
GBufferFrame read_frame(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Renders `n_frames` input/label pairs along a seeded orbit and writes them
/// as frame_%05d/ directories plus manifest.txt under `out_dir`.
/// A nonzero scene.rng_seed also jitters the light direction per frame.
Manifest generate_dataset(const SceneSpec& scene, int n_frames, std::uint64_t camera_path_seed,
                          const TessellationConfig& tess, const std::filesystem::path& out_dir,
                          int width, int height, const OrbitConfig& orbit = {});

} // namespace nist
