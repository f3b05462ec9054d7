// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace nist {

/// Exit codes: 0 success, 1 pipeline error, 2 usage error.
int run_cli(int argc, char** argv);

} // namespace nist
