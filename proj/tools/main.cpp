// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/cli.hpp"

int main(int argc, char** argv) { return nist::run_cli(argc, argv); }
