// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace groklab {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// The release-gate oracle suite behind `groklab check`: finite-difference
/// gradient checks for every op and all three model families, scalar
/// optimizer oracles, the SGD L2/decay equivalence, dataset-split
/// invariants, and a negative control that verifies the gradient checker
/// catches a deliberately corrupted relu backward.
std::vector<CheckResult> run_selfchecks();

}  // namespace groklab
