// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

namespace nist::pfm {

/// Float image with interleaved channels, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1; // 1 ("Pf") or 3 ("PF")
  std::vector<float> data;
};

/// Little-endian PFM (scale -1.0) with rows stored bottom-to-top.
void write(const std::filesystem::path& path, const Image& image);
Image read(const std::filesystem::path& path);

} // namespace nist::pfm
