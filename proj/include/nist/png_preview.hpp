// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>

namespace nist {

/// 8-bit RGB preview of an interleaved float image in [0, 1] (row 0 at the top).
void write_png(const std::filesystem::path& path, std::span<const float> rgb, int width, int height);

} // namespace nist
