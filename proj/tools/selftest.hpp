// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dasm::cli {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick invariant checks on small random instances (a few seconds).
std::vector<SelftestResult> run_selftest(std::uint64_t seed);

}  // namespace dasm::cli
