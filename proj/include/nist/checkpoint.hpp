// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include "nist/network.hpp"

namespace nist {

/// Binary layout, little-endian: "NIST", u32 version, config block, u64
/// tensor count, then per tensor u32 name length, name bytes, u32 rank, i32
/// dims, raw f32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Network<float>& net);

ModelConfig read_checkpoint_config(const std::filesystem::path& path);

/// Loads parameters into `net`; throws when the stored config differs from
/// net.config() or when any tensor is missing, extra, or misshapen.
void load_checkpoint(const std::filesystem::path& path, Network<float>& net);

/// Convenience: constructs a network from the stored config and loads it.
Network<float> load_network(const std::filesystem::path& path);

} // namespace nist
