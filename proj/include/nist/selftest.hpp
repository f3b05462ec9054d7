// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nist {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Gradient checks for every operator and loss, Phong tessellation
/// invariants, and warp/loss identities. Each result is also printed to `log`
/// as it completes.
std::vector<SelftestCheck> run_selftest(std::ostream& log);

} // namespace nist
